#pragma once

#include "spreaddiv/config.hpp"
#include "spreaddiv/csv.hpp"

namespace spreaddiv {

inline constexpr const char* kLibraryVersion = "0.1.0";

/// Canned experiment names: fig2c, fig4a, fig4b, subspace, toy2d, j1-demo.
std::vector<std::string> experiment_names();

/// Runs the named experiment and returns its results table (header fixed per
/// experiment). Unknown experiment names or unknown parameter keys throw.
CsvWriter build_experiment_results(const ExperimentSpec& spec);

/// Runs the experiment and writes <out>/results.csv and <out>/meta.txt
/// (serialized spec, seed, library version). Byte-identical for a given spec.
void run_experiment(const ExperimentSpec& spec);

}  // namespace spreaddiv

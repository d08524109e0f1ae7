#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "selab/estimator.hpp"
#include "selab/objectives.hpp"
#include "selab/synthdata.hpp"

namespace selab::cli {

/// Runs one command line, program name excluded. Returns the exit code:
/// 0 on success, 1 on a runtime failure, 2 on a usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 200 / 40 / 40 utterances of 1 s. Training mixtures pair each utterance
/// with one SNR and noise kind; every test utterance is mixed at every test
/// SNR with every noise kind.
synth::CorpusSpec default_compare_corpus();
/// Defaults of TrainConfig with at most 50 epochs.
estimator::TrainConfig default_compare_training();

struct CompareConfig {
    synth::CorpusSpec corpus = default_compare_corpus();
    std::optional<std::filesystem::path> corpus_dir;
    std::vector<objectives::ObjectiveId> objectives{objectives::all_objectives().begin(),
                                                    objectives::all_objectives().end()};
    std::vector<std::size_t> hidden{512, 512};
    estimator::TrainConfig train = default_compare_training();
};

struct GridRow {
    std::string metric;
    std::string system;
    std::vector<double> per_snr;
    double average = 0.0;
};

/// Columns are the test SNRs; each cell averages every test mixture at
/// that SNR, and `average` is the mean over the columns.
struct CompareGrid {
    std::vector<double> snrs_db;
    std::vector<GridRow> rows;
};

/// Trains every configured objective on the same corpus and scores the
/// enhanced test mixtures. Progress goes to `log`.
CompareGrid run_compare(const CompareConfig& cfg, std::ostream& log);

/// Tab-separated: a header (proxy_metric, system, one column per SNR, avg) and
/// one line per row, four decimals.
std::string format_grid(const CompareGrid& grid);

} // namespace selab::cli

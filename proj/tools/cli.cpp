#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "selab/checkpoint.hpp"
#include "selab/corpus_io.hpp"
#include "selab/enhance.hpp"
#include "selab/gradcheck.hpp"
#include "selab/metrics.hpp"
#include "selab/wav.hpp"

namespace selab::cli {
namespace {

std::string fixed4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f << text;
    if (!f) throw std::runtime_error("failed writing " + path.string());
}

void require_file(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) throw std::runtime_error("missing file: " + path.string());
}

// Corpus-size flags shared by synth, train and compare.
struct CorpusFlags {
    std::size_t utterances = 0;
    std::size_t validation = 0;
    std::size_t test = 0;
    double seconds = 0.0;
    std::vector<double> snrs;
    std::vector<std::string> noise;
    bool audio_only = false;
    std::uint64_t seed = 0;

    explicit CorpusFlags(const synth::CorpusSpec& d)
        : utterances(d.num_utterances), validation(d.num_validation_utterances), test(d.num_test_utterances),
          seconds(d.utterance_seconds), snrs(d.test_snr_grid_db), seed(d.seed) {}

    void add(CLI::App* app) {
        app->add_option("--utterances", utterances, "Training utterances")->capture_default_str();
        app->add_option("--val-utterances", validation, "Validation utterances")->capture_default_str();
        app->add_option("--test-utterances", test, "Test utterances")->capture_default_str();
        app->add_option("--seconds", seconds, "Utterance length in seconds")
            ->check(CLI::Range(synth::kMinSeconds, 60.0))
            ->capture_default_str();
        app->add_option("--snr", snrs, "Test SNR grid in dB")->capture_default_str();
        app->add_option("--noise", noise, "Noise kinds (white, ssn_proxy, babble_proxy)");
        app->add_flag("--audio-only", audio_only, "No auxiliary envelope features");
        app->add_option("--seed", seed, "Corpus and training seed")->capture_default_str();
    }

    synth::CorpusSpec apply(synth::CorpusSpec spec) const {
        spec.num_utterances = utterances;
        spec.num_validation_utterances = validation;
        spec.num_test_utterances = test;
        spec.utterance_seconds = seconds;
        spec.test_snr_grid_db = snrs;
        if (!noise.empty()) {
            spec.noise_kinds.clear();
            for (const auto& n : noise) spec.noise_kinds.push_back(synth::parse_noise_kind(n));
        }
        spec.with_aux = !audio_only;
        spec.seed = seed;
        return spec;
    }
};

struct TrainFlags {
    std::vector<std::size_t> hidden{512, 512};
    estimator::TrainConfig cfg;

    void add(CLI::App* app) {
        app->add_option("--hidden", hidden, "Hidden layer widths")->capture_default_str();
        app->add_option("--epochs", cfg.max_epochs, "Maximum epochs")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        app->add_option("--batch-size", cfg.batch_size, "Minibatch size")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        app->add_option("--lr", cfg.initial_lr, "Initial learning rate")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
    }
};

synth::Dataset load_or_build(const std::optional<std::filesystem::path>& dir, const synth::CorpusSpec& spec) {
    if (dir) {
        require_file(*dir / corpus::kManifestName);
        return corpus::read_corpus(*dir, spec.with_aux);
    }
    return synth::build_dataset(spec);
}

estimator::FitResult train_one(const synth::Dataset& data, objectives::ObjectiveId id,
                               const std::vector<std::size_t>& hidden, estimator::TrainConfig cfg, bool with_aux,
                               std::uint64_t seed, std::ostream& log) {
    const auto train = synth::collect_examples(data.train);
    const auto validation = synth::collect_examples(data.validation);
    if (train.empty()) throw InvalidInput("training split has no complete chunks");
    const std::size_t aux_dim = with_aux && !train.front().aux.empty() ? train.front().aux.size() : 0;
    const estimator::ChunkShape shape{dsp::kNumBins, dsp::kChunkFrames, aux_dim};
    auto model = estimator::init_model(estimator::layer_sizes_for(shape, hidden),
                                       objectives::output_activation_for(id), seed, shape);
    model.objective = id;
    cfg.seed = seed;
    auto result = estimator::fit(std::move(model), train, validation, id, cfg);
    for (const auto& e : result.history.epochs) {
        log << objectives::to_string(id) << " epoch " << e.epoch << " train " << e.train_loss;
        if (e.validation_loss) log << " validation " << *e.validation_loss;
        log << " lr " << e.lr << "\n";
    }
    log << objectives::to_string(id) << " best epoch " << result.history.best_epoch << "\n";
    return result;
}

int cmd_synth(const std::string& dir, const CorpusFlags& flags, std::ostream& out) {
    const auto spec = flags.apply(synth::CorpusSpec{});
    const auto data = synth::build_dataset(spec);
    const auto entries = corpus::write_corpus(dir, data);
    out << "wrote " << entries.size() << " mixtures to " << dir << "\n";
    return 0;
}

int cmd_train(const std::string& objective, const std::optional<std::filesystem::path>& dir,
              const std::string& model_out, const CorpusFlags& corpus_flags, const TrainFlags& train_flags,
              std::ostream& out, std::ostream& err) {
    const auto id = objectives::parse_objective(objective);
    const auto spec = corpus_flags.apply(synth::CorpusSpec{});
    const auto data = load_or_build(dir, spec);
    const auto result =
        train_one(data, id, train_flags.hidden, train_flags.cfg, spec.with_aux, corpus_flags.seed, err);
    checkpoint::save(model_out, result.model);
    out << "saved " << model_out << " (best validation " << result.history.best_validation_loss << ")\n";
    return 0;
}

int cmd_enhance(std::optional<std::string> objective, const std::optional<std::string>& model_in, bool identity,
                const std::string& input, const std::string& output, const std::optional<std::string>& aux_from,
                std::ostream& out) {
    require_file(input);
    const auto noisy = wav::read(input);
    estimator::EstimatorModel model;
    if (identity) {
        // Rectified constant 1: a unit mask on every bin.
        const std::size_t hidden[] = {1};
        model = estimator::constant_output_model(hidden, objectives::Activation::rectifier, 1.0);
        if (!objective) objective = "stsa-im";
    } else {
        if (!model_in) throw InvalidInput("enhance needs --model-in or --identity-mask");
        require_file(*model_in);
        model = checkpoint::load(*model_in);
    }
    objectives::ObjectiveId id;
    if (objective)
        id = objectives::parse_objective(*objective);
    else if (model.objective)
        id = *model.objective;
    else
        throw InvalidInput("checkpoint names no objective; pass --objective");
    if (id.approach == objectives::Approach::dm && identity)
        throw InvalidInput("--identity-mask needs a mask objective");

    std::vector<std::vector<double>> aux;
    if (model.shape.aux_dim > 0) {
        if (!aux_from) throw InvalidInput("model expects aux features; pass --aux-from <clean.wav>");
        require_file(*aux_from);
        const auto clean = wav::read(*aux_from);
        aux = synth::envelope_aux(dsp::magnitude(dsp::stft(clean)));
    }
    const auto result = enhance::enhance_utterance(model, id, noisy, aux);
    wav::write(output, result.enhanced);
    out << "wrote " << output << "\n";
    return 0;
}

int cmd_eval(const std::string& clean_path, const std::string& enhanced_path,
             const std::optional<std::string>& noisy_path, const std::optional<std::string>& report,
             std::ostream& out) {
    require_file(clean_path);
    require_file(enhanced_path);
    const auto clean = wav::read(clean_path);
    const auto enhanced = wav::read(enhanced_path);
    const auto m = metrics::evaluate(clean, enhanced);
    std::ostringstream text;
    text << "metric\tenhanced";
    std::optional<metrics::MetricReport> base;
    if (noisy_path) {
        require_file(*noisy_path);
        base = metrics::evaluate(clean, wav::read(*noisy_path));
        text << "\tnoisy\timprovement";
    }
    text << "\n";
    auto line = [&](const char* name, double v, double b) {
        text << name << "\t" << fixed4(v);
        if (base) text << "\t" << fixed4(b) << "\t" << fixed4(v - b);
        text << "\n";
    };
    line("si_sdr_db", m.si_sdr_db, base ? base->si_sdr_db : 0.0);
    line("seg_snr_db", m.seg_snr_db, base ? base->seg_snr_db : 0.0);
    line("lsd_db", m.lsd_db, base ? base->lsd_db : 0.0);
    out << text.str();
    if (report) write_text(*report, text.str());
    return 0;
}

int cmd_compare(CompareConfig cfg, const std::optional<std::string>& report, std::ostream& out,
                std::ostream& err) {
    const auto grid = run_compare(cfg, err);
    const auto text = format_grid(grid);
    out << text;
    if (report) write_text(*report, text);
    return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::ostream& out) {
    bool all = true;
    for (const auto& r : gradcheck::check_all(seed)) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s %s loss_rel_err=%.3e model_rel_err=%.3e\n", r.passed ? "PASS" : "FAIL",
                      objectives::to_string(r.id).c_str(), r.loss_rel_error, r.model_rel_error);
        out << buf;
        all = all && r.passed;
    }
    return all ? 0 : 1;
}

} // namespace

synth::CorpusSpec default_compare_corpus() {
    synth::CorpusSpec spec;
    spec.train_pairing = synth::Pairing::round_robin;
    spec.test_pairing = synth::Pairing::cartesian;
    return spec;
}

estimator::TrainConfig default_compare_training() {
    estimator::TrainConfig cfg;
    cfg.max_epochs = 50;
    return cfg;
}

CompareGrid run_compare(const CompareConfig& cfg, std::ostream& log) {
    const auto data = load_or_build(cfg.corpus_dir, cfg.corpus);
    if (data.test.empty()) throw InvalidInput("compare: empty test split");

    CompareGrid grid;
    for (const auto& rec : data.test) grid.snrs_db.push_back(rec.mixture.snr_db);
    std::sort(grid.snrs_db.begin(), grid.snrs_db.end());
    grid.snrs_db.erase(std::unique(grid.snrs_db.begin(), grid.snrs_db.end()), grid.snrs_db.end());
    const auto column = [&](double snr) {
        return static_cast<std::size_t>(std::lower_bound(grid.snrs_db.begin(), grid.snrs_db.end(), snr) -
                                        grid.snrs_db.begin());
    };
    const std::size_t cols = grid.snrs_db.size();

    // sums[metric][column], counts[column]
    using Sums = std::array<std::vector<double>, 3>;
    std::vector<std::size_t> counts(cols, 0);
    for (const auto& rec : data.test) ++counts[column(rec.mixture.snr_db)];
    const char* names[3] = {"si_sdr_db", "seg_snr_db", "lsd_db"};
    std::vector<std::pair<std::string, Sums>> systems;

    auto score = [&](const std::string& system, const auto& estimate_for) {
        Sums sums;
        for (auto& s : sums) s.assign(cols, 0.0);
        for (const auto& rec : data.test) {
            const auto m = metrics::evaluate(rec.mixture.clean, estimate_for(rec));
            const std::size_t c = column(rec.mixture.snr_db);
            sums[0][c] += m.si_sdr_db;
            sums[1][c] += m.seg_snr_db;
            sums[2][c] += m.lsd_db;
        }
        systems.emplace_back(system, std::move(sums));
    };

    score("noisy", [](const synth::MixtureRecord& rec) { return rec.mixture.noisy; });
    for (const auto& id : cfg.objectives) {
        const auto fit = train_one(data, id, cfg.hidden, cfg.train, cfg.corpus.with_aux, cfg.corpus.seed, log);
        score(objectives::to_string(id), [&](const synth::MixtureRecord& rec) {
            return enhance::enhance_utterance(fit.model, id, rec.mixture.noisy, rec.aux).enhanced;
        });
    }

    for (std::size_t m = 0; m < 3; ++m) {
        for (const auto& [system, sums] : systems) {
            GridRow row{names[m], system, std::vector<double>(cols), 0.0};
            for (std::size_t c = 0; c < cols; ++c) {
                row.per_snr[c] = sums[m][c] / static_cast<double>(counts[c]);
                row.average += row.per_snr[c];
            }
            row.average /= static_cast<double>(cols);
            grid.rows.push_back(std::move(row));
        }
    }
    return grid;
}

std::string format_grid(const CompareGrid& grid) {
    std::ostringstream s;
    s << "proxy_metric\tsystem";
    for (double snr : grid.snrs_db) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%gdB", snr);
        s << "\t" << buf;
    }
    s << "\tavg\n";
    for (const auto& row : grid.rows) {
        s << row.metric << "\t" << row.system;
        for (double v : row.per_snr) s << "\t" << fixed4(v);
        s << "\t" << fixed4(row.average) << "\n";
    }
    return s.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Speech enhancement objective laboratory"};
    app.require_subcommand(1);

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Build a synthetic corpus");
    std::string synth_dir;
    CorpusFlags synth_flags{synth::CorpusSpec{}};
    synth_cmd->add_option("--corpus-dir", synth_dir, "Output directory")->required();
    synth_flags.add(synth_cmd);

    // train
    auto* train_cmd = app.add_subcommand("train", "Fit a model for one objective");
    std::string train_objective;
    std::optional<std::filesystem::path> train_dir;
    std::string model_out;
    CorpusFlags train_corpus{synth::CorpusSpec{}};
    TrainFlags train_flags;
    train_cmd->add_option("--objective", train_objective, "Objective id, e.g. stsa-im")->required();
    train_cmd->add_option("--corpus-dir", train_dir, "Corpus written by synth (default: generate in memory)");
    train_cmd->add_option("--model-out", model_out, "Checkpoint path")->required();
    train_corpus.add(train_cmd);
    train_flags.add(train_cmd);

    // enhance
    auto* enhance_cmd = app.add_subcommand("enhance", "Enhance a WAV file");
    std::optional<std::string> enhance_objective;
    std::optional<std::string> model_in;
    std::optional<std::string> aux_from;
    std::string input;
    std::string output;
    bool identity = false;
    enhance_cmd->add_option("--objective", enhance_objective, "Objective id (default: from checkpoint)");
    enhance_cmd->add_option("--model-in", model_in, "Checkpoint path");
    enhance_cmd->add_flag("--identity-mask", identity, "Use a unit mask instead of a model");
    enhance_cmd->add_option("--input", input, "Noisy WAV")->required();
    enhance_cmd->add_option("--output", output, "Enhanced WAV")->required();
    enhance_cmd->add_option("--aux-from", aux_from, "Clean WAV the aux features are computed from");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Score an enhanced WAV against the clean reference");
    std::string eval_clean;
    std::string eval_enhanced;
    std::optional<std::string> eval_noisy;
    std::optional<std::string> eval_report;
    eval_cmd->add_option("--clean", eval_clean, "Clean WAV")->required();
    eval_cmd->add_option("--enhanced", eval_enhanced, "Enhanced WAV")->required();
    eval_cmd->add_option("--noisy", eval_noisy, "Noisy WAV, to report improvements");
    eval_cmd->add_option("--report", eval_report, "Tab-separated report path");

    // compare
    auto* compare_cmd = app.add_subcommand("compare", "Train and score every objective across the SNR grid");
    CompareConfig compare_cfg;
    CorpusFlags compare_corpus{compare_cfg.corpus};
    TrainFlags compare_train;
    compare_train.cfg = compare_cfg.train;
    std::optional<std::filesystem::path> compare_dir;
    std::optional<std::string> compare_report;
    std::vector<std::string> compare_objectives;
    compare_cmd->add_option("--corpus-dir", compare_dir, "Corpus written by synth (default: generate in memory)");
    compare_cmd->add_option("--objective", compare_objectives, "Restrict to these objectives");
    compare_cmd->add_option("--report", compare_report, "Tab-separated grid path");
    compare_corpus.add(compare_cmd);
    compare_train.add(compare_cmd);

    // gradcheck
    auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every objective");
    std::uint64_t grad_seed = 1;
    grad_cmd->add_option("--seed", grad_seed, "Seed")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : 2;
    }

    try {
        if (*synth_cmd) return cmd_synth(synth_dir, synth_flags, out);
        if (*train_cmd)
            return cmd_train(train_objective, train_dir, model_out, train_corpus, train_flags, out, err);
        if (*enhance_cmd) return cmd_enhance(enhance_objective, model_in, identity, input, output, aux_from, out);
        if (*eval_cmd) return cmd_eval(eval_clean, eval_enhanced, eval_noisy, eval_report, out);
        if (*compare_cmd) {
            compare_cfg.corpus = compare_corpus.apply(compare_cfg.corpus);
            compare_cfg.corpus_dir = compare_dir;
            compare_cfg.hidden = compare_train.hidden;
            compare_cfg.train = compare_train.cfg;
            if (!compare_objectives.empty()) {
                compare_cfg.objectives.clear();
                for (const auto& name : compare_objectives)
                    compare_cfg.objectives.push_back(objectives::parse_objective(name));
            }
            return cmd_compare(compare_cfg, compare_report, out, err);
        }
        if (*grad_cmd) return cmd_gradcheck(grad_seed, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

} // namespace selab::cli

// Acceptance runner: one PASS/FAIL line per criterion.
//
//   acceptance [--criterion N]... [--objective ID]...
//
// With no --criterion every criterion runs. --objective restricts the
// trainability check (criterion 5) to the named objectives.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "selab/enhance.hpp"
#include "selab/gradcheck.hpp"
#include "selab/metrics.hpp"
#include "selab/synthdata.hpp"

using namespace selab;
using objectives::Activation;
using objectives::Approach;
using objectives::Domain;
using objectives::ObjectiveId;
using clk = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

struct Criterion {
    int number;
    std::string name;
    double budget_s;  // 0 for none
    std::function<Outcome()> run;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

double seconds_since(clk::time_point t) { return std::chrono::duration<double>(clk::now() - t).count(); }

Outcome gradient_suite() {
    double worst_loss = 0.0, worst_model = 0.0;
    bool ok = true;
    for (const auto& r : gradcheck::check_all(1)) {
        worst_loss = std::max(worst_loss, r.loss_rel_error);
        worst_model = std::max(worst_model, r.model_rel_error);
        if (!r.passed) {
            ok = false;
            std::cout << "  " << objectives::to_string(r.id) << " failed\n";
        }
    }
    return {ok, fmt("worst loss rel err %.2e, worst model rel err %.2e", worst_loss, worst_model)};
}

Outcome ma_identity() {
    std::mt19937_64 rng(2);
    const ObjectiveId stsa_ma{Domain::stsa, Approach::ma};
    const ObjectiveId pssa_ma{Domain::pssa, Approach::ma};
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        // Magnitudes in [0.5, 2] keep A/R inside both mask ranges, so nothing is clipped.
        const auto ctx = gradcheck::random_context(rng, 6, 4, 3);
        const auto m_hat = gradcheck::random_output(pssa_ma, rng, 6, 4);
        const double a = objectives::loss_value(stsa_ma, ctx, m_hat);
        const double b = objectives::weighted_im_value(ctx, m_hat, false);
        const double c = objectives::loss_value(pssa_ma, ctx, m_hat);
        const double d = objectives::weighted_im_value(ctx, m_hat, true);
        worst = std::max({worst, std::abs(a - b) / a, std::abs(c - d) / c});
    }
    return {worst < 1e-10, fmt("worst relative gap %.2e over 1000 contexts", worst)};
}

Outcome stft_round_trip() {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 0.3);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        dsp::Waveform x{std::vector<double>(16000)};
        for (double& s : x.samples) s = g(rng);
        const auto y = dsp::istft(dsp::stft(x), x.size());
        double num = 0.0, den = 0.0;
        for (std::size_t n = dsp::kWindowLength; n < x.size() - dsp::kWindowLength; ++n) {
            num += (x.samples[n] - y.samples[n]) * (x.samples[n] - y.samples[n]);
            den += x.samples[n] * x.samples[n];
        }
        worst = std::max(worst, std::sqrt(num / den));
    }
    return {worst < 1e-6, fmt("worst interior relative RMS error %.2e", worst)};
}

Outcome oracle_mask_ceiling() {
    double total = 0.0, lowest = 1e9;
    int count = 0;
    for (auto kind : {synth::NoiseKind::white, synth::NoiseKind::ssn_proxy, synth::NoiseKind::babble_proxy})
        for (std::uint64_t s = 0; s < 4; ++s) {
            const auto mix = signal::mix_at_snr(synth::gen_clean(100 + s, 1.0), synth::gen_noise(kind, 200 + s, 1.0), 0.0);
            const auto ys = dsp::stft(mix.noisy);
            const auto a = dsp::magnitude(dsp::stft(mix.clean));
            const auto r = dsp::magnitude(ys);
            // Unclipped A / R applied to R.
            Matrix mag(r.values.rows(), r.values.cols());
            for (std::size_t i = 0; i < mag.size(); ++i)
                mag.data()[i] = a.values.data()[i] / (r.values.data()[i] + signal::kDivisionFloor) * r.values.data()[i];
            const auto enhanced = dsp::istft(enhance::with_phase(mag, ys), mix.noisy.size());
            const double gain = metrics::si_sdr(mix.clean, enhanced) - metrics::si_sdr(mix.clean, mix.noisy);
            total += gain;
            lowest = std::min(lowest, gain);
            ++count;
        }
    const double mean = total / count;
    return {mean >= 8.0, fmt("mean SI-SDR gain %.2f dB over %g mixtures (lowest %.2f dB)", mean, count, lowest)};
}

struct TrainabilityCorpus {
    synth::Dataset dataset;
    std::vector<estimator::TrainingExample> train;
    std::vector<estimator::TrainingExample> validation;
};

const TrainabilityCorpus& trainability_corpus() {
    static const TrainabilityCorpus corpus = [] {
        synth::CorpusSpec spec;  // 200 / 40 / 40 utterances of 1 s
        spec.train_pairing = synth::Pairing::round_robin;
        spec.test_pairing = synth::Pairing::round_robin;
        spec.test_snr_grid_db = {0.0};
        spec.seed = 7;
        const auto t = clk::now();
        TrainabilityCorpus c{synth::build_dataset(spec), {}, {}};
        c.train = synth::collect_examples(c.dataset.train);
        c.validation = synth::collect_examples(c.dataset.validation);
        std::printf("  corpus: %zu train / %zu validation chunks, %zu test mixtures (%.1f s)\n", c.train.size(),
                    c.validation.size(), c.dataset.test.size(), seconds_since(t));
        return c;
    }();
    return corpus;
}

constexpr int kTrainabilityEpochs = 50;

Outcome trainability(ObjectiveId id) {
    const auto& c = trainability_corpus();
    const auto t = clk::now();
    const estimator::ChunkShape shape{dsp::kNumBins, dsp::kChunkFrames, dsp::kChunkFrames};
    const std::size_t hidden[] = {512, 512};
    auto model = estimator::init_model(estimator::layer_sizes_for(shape, hidden), objectives::output_activation_for(id),
                                       1, shape);
    estimator::TrainConfig cfg;
    cfg.max_epochs = kTrainabilityEpochs;
    const auto fit = estimator::fit(std::move(model), c.train, c.validation, id, cfg);
    const auto& h = fit.history.epochs;
    const double ratio = h.back().train_loss / h.front().train_loss;

    double gain = 0.0;
    for (const auto& rec : c.dataset.test) {
        const auto out = enhance::enhance_utterance(fit.model, id, rec.mixture.noisy, rec.aux);
        gain += metrics::segmental_snr(rec.mixture.clean, out.enhanced) -
                metrics::segmental_snr(rec.mixture.clean, rec.mixture.noisy);
    }
    gain /= static_cast<double>(c.dataset.test.size());
    const double elapsed = seconds_since(t);
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s: %zu epochs, train loss %.4g -> %.4g (x%.3f), segSNR gain %+.2f dB, %.0f s",
                  objectives::to_string(id).c_str(), h.size(), h.front().train_loss, h.back().train_loss, ratio, gain,
                  elapsed);
    return {ratio <= 0.5 && gain > 0.0 && elapsed < 600.0, buf};
}

Outcome snr_exactness() {
    double worst = 0.0;
    for (double snr : synth::default_snr_grid())
        for (auto kind : {synth::NoiseKind::white, synth::NoiseKind::ssn_proxy, synth::NoiseKind::babble_proxy}) {
            const auto mix = signal::mix_at_snr(synth::gen_clean(300, 1.0), synth::gen_noise(kind, 301, 1.0), snr);
            worst = std::max(worst, std::abs(signal::measured_snr_db(mix) - snr));
        }
    synth::CorpusSpec spec;
    spec.num_utterances = 2;
    spec.num_validation_utterances = 1;
    spec.num_test_utterances = 0;
    spec.utterance_seconds = 0.5;
    spec.with_aux = false;
    const auto ds = synth::build_dataset(spec);
    std::set<double> seen;
    for (const auto* split : {&ds.train, &ds.validation})
        for (const auto& rec : *split) {
            worst = std::max(worst, std::abs(signal::measured_snr_db(rec.mixture) - rec.mixture.snr_db));
            seen.insert(rec.mixture.snr_db);
        }
    return {worst < 0.01 && seen.size() == 9, fmt("worst deviation %.2e dB over %g grid points", worst, static_cast<double>(seen.size()))};
}

std::vector<estimator::TrainingExample> tiny_examples(std::mt19937_64& rng, std::size_t n) {
    std::vector<estimator::TrainingExample> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({gradcheck::random_context(rng, 3, 2, 2), {}});
    return out;
}

Outcome schedule() {
    std::mt19937_64 rng(7);
    const auto train = tiny_examples(rng, 10);
    const estimator::ChunkShape shape{3, 2, 0};
    const std::size_t hidden[] = {4};
    const ObjectiveId id{Domain::stsa, Approach::dm};
    const auto model = estimator::init_model(estimator::layer_sizes_for(shape, hidden), Activation::exponential, 3, shape);
    estimator::TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.initial_lr = 1e-2;
    cfg.max_epochs = 30;
    std::vector<std::string> problems;

    // First increase at epoch 6: the rate halves once, from epoch 7 on.
    const std::vector<double> script{3.0, 2.0, 2.5, 1.0, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05, 0.01, 0.005, 0.001, 1e-4, 1e-5};
    const auto a = estimator::fit(model, train, {}, id, cfg, [&](const estimator::EstimatorModel&, int epoch) {
        return script[static_cast<std::size_t>(epoch / 2 - 1)];
    });
    if (a.history.epochs.size() != 30) problems.push_back("halving run stopped early");
    for (const auto& e : a.history.epochs)
        if (e.lr != (e.epoch <= 6 ? 1e-2 : 5e-3)) {
            problems.push_back("lr " + std::to_string(e.lr) + " at epoch " + std::to_string(e.epoch));
            break;
        }

    // Best at epoch 2, then nothing better: stop once the best is 10 epochs old.
    std::vector<estimator::EstimatorModel> snapshots;
    const auto b = estimator::fit(model, train, {}, id, cfg, [&](const estimator::EstimatorModel& m, int epoch) {
        snapshots.push_back(m);
        return epoch == 2 ? 1.0 : 1.5;
    });
    if (!b.history.stopped_early || b.history.epochs.size() != 12) problems.push_back("did not stop at epoch 12");
    if (b.history.best_epoch != 2 || snapshots.empty() || !(b.model == snapshots.front()))
        problems.push_back("did not return the epoch-2 snapshot");

    std::string detail = problems.empty() ? "halving at epoch 6, stop at epoch 12 with the epoch-2 snapshot" : "";
    for (const auto& p : problems) detail += (detail.empty() ? "" : "; ") + p;
    return {problems.empty(), detail};
}

Outcome activation_contract() {
    const std::vector<std::pair<std::string, Activation>> table{
        {"stsa-dm", Activation::exponential}, {"lsa-dm", Activation::exponential},
        {"msa-dm", Activation::exponential},  {"lmsa-dm", Activation::exponential},
        {"pssa-dm", Activation::linear},      {"stsa-im", Activation::rectifier},
        {"lsa-im", Activation::rectifier},    {"msa-im", Activation::rectifier},
        {"lmsa-im", Activation::rectifier},   {"pssa-im", Activation::linear},
        {"stsa-ma", Activation::rectifier},   {"pssa-ma", Activation::linear},
    };
    int mismatches = 0;
    for (const auto& [name, act] : table) {
        const auto got = objectives::output_activation_for(objectives::parse_objective(name));
        if (got != act) {
            ++mismatches;
            std::cout << "  " << name << ": " << objectives::to_string(got) << ", expected " << objectives::to_string(act)
                      << "\n";
        }
    }
    const bool complete = objectives::all_objectives().size() == table.size();
    return {mismatches == 0 && complete, fmt("%g objectives checked, %g mismatches", static_cast<double>(table.size()), mismatches)};
}

Outcome determinism() {
    const auto dir = std::filesystem::temp_directory_path() / "selab_acceptance_determinism";
    std::filesystem::create_directories(dir);
    std::vector<std::string> args{"compare",   "--seed",    "11", "--utterances", "6", "--val-utterances", "2",
                                  "--test-utterances", "2", "--seconds", "0.5", "--hidden", "16", "--epochs", "2",
                                  "--objective", "stsa-im", "lsa-dm", "pssa-ma", "--report"};
    std::string reports[2];
    for (int i = 0; i < 2; ++i) {
        const auto path = dir / ("report" + std::to_string(i) + ".tsv");
        auto a = args;
        a.push_back(path.string());
        std::ostringstream out, err;
        if (cli::run(a, out, err) != 0) return {false, "compare failed: " + err.str()};
        std::ifstream in(path, std::ios::binary);
        reports[i].assign(std::istreambuf_iterator<char>(in), {});
    }
    std::filesystem::remove_all(dir);
    const bool same = !reports[0].empty() && reports[0] == reports[1];
    return {same, fmt("%g-byte reports ", static_cast<double>(reports[0].size())) + (same ? "identical" : "differ")};
}

} // namespace

int main(int argc, char** argv) {
    std::set<int> wanted;
    std::vector<ObjectiveId> objectives_wanted;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--criterion" && i + 1 < argc) {
            wanted.insert(std::stoi(argv[++i]));
        } else if (arg == "--objective" && i + 1 < argc) {
            objectives_wanted.push_back(objectives::parse_objective(argv[++i]));
        } else {
            std::cerr << "usage: acceptance [--criterion N]... [--objective ID]...\n";
            return 2;
        }
    }
    if (objectives_wanted.empty())
        objectives_wanted.assign(objectives::all_objectives().begin(), objectives::all_objectives().end());

    std::vector<Criterion> criteria{
        {1, "gradient suite", 30, gradient_suite},
        {2, "MA equals weighted IM", 5, ma_identity},
        {3, "STFT round trip", 10, stft_round_trip},
        {4, "oracle-mask ceiling", 30, oracle_mask_ceiling},
    };
    for (const auto& id : objectives_wanted)
        criteria.push_back({5, "trainability " + objectives::to_string(id), 0, [id] { return trainability(id); }});
    criteria.push_back({6, "SNR mixing exactness", 0, snr_exactness});
    criteria.push_back({7, "validation schedule", 0, schedule});
    criteria.push_back({8, "activation contract", 0, activation_contract});
    criteria.push_back({9, "compare determinism", 0, determinism});

    int failures = 0;
    for (const auto& c : criteria) {
        if (!wanted.empty() && !wanted.count(c.number)) continue;
        const auto t = clk::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double elapsed = seconds_since(t);
        if (c.budget_s > 0 && elapsed >= c.budget_s) {
            o.passed = false;
            o.detail += fmt("; over the %.0f s budget", c.budget_s);
        }
        std::printf("%s criterion %d: %s (%s; %.1f s)\n", o.passed ? "PASS" : "FAIL", c.number, c.name.c_str(),
                    o.detail.c_str(), elapsed);
        std::fflush(stdout);
        failures += o.passed ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}

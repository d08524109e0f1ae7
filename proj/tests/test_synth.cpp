#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "selab/synthdata.hpp"
#include "support.hpp"

using namespace selab;
using namespace selab::synth;

namespace {

std::vector<double> power_spectrum(const dsp::Waveform& w) {
    const auto mag = dsp::magnitude(dsp::stft(w, kernels::Exec::serial)).values;
    std::vector<double> p(mag.rows(), 0.0);
    for (std::size_t k = 0; k < mag.rows(); ++k)
        for (std::size_t l = 0; l < mag.cols(); ++l) p[k] += mag(k, l) * mag(k, l) / static_cast<double>(mag.cols());
    return p;
}

double peak(const dsp::Waveform& w) {
    double m = 0.0;
    for (double s : w.samples) m = std::max(m, std::abs(s));
    return m;
}

CorpusSpec small_spec() {
    CorpusSpec spec;
    spec.num_utterances = 10;
    spec.num_validation_utterances = 2;
    spec.num_test_utterances = 2;
    spec.utterance_seconds = 0.3;
    spec.snr_grid_db = {5.0};
    spec.test_snr_grid_db = {-5.0, 0.0};
    spec.seed = 9;
    return spec;
}

} // namespace

TEST_SUITE("synthdata") {

TEST_CASE("gen_clean is deterministic, peak-normalized and low-pass heavy") {
    const auto a = gen_clean(1234, 1.0);
    CHECK(a.size() == 16000);
    CHECK(a.sample_rate_hz == 16000);
    CHECK(a.samples == gen_clean(1234, 1.0).samples);
    CHECK(a.samples != gen_clean(1235, 1.0).samples);
    CHECK(peak(a) == doctest::Approx(1.0));
    const auto p = power_spectrum(a);
    double low = 0.0, total = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        total += p[k];
        if (k * 25 < 4000) low += p[k];
    }
    CHECK(low / total >= 0.7);
    CHECK(gen_clean(7, 0.25).size() == 4000);
    CHECK_THROWS_AS(gen_clean(1, 0.1), InvalidInput);
    CHECK_THROWS_AS(gen_noise(NoiseKind::white, 1, 0.1), InvalidInput);
}

TEST_CASE("white noise is spectrally flat") {
    const auto w = gen_noise(NoiseKind::white, 5, 4.0);
    CHECK(w.size() == 64000);
    CHECK(peak(w) == doctest::Approx(1.0));
    const auto p = power_spectrum(w);
    double mean = 0.0;
    for (std::size_t k = 1; k < 321; ++k) mean += p[k] / 320.0;
    for (std::size_t band = 0; band < 8; ++band) {
        double b = 0.0;
        for (std::size_t k = 1 + band * 40; k < 1 + (band + 1) * 40; ++k) b += p[k] / 40.0;
        CHECK(std::abs(10.0 * std::log10(b / mean)) < 3.0);
    }
}

TEST_CASE("speech-shaped noise follows the long-term clean spectrum") {
    const auto n = gen_noise(NoiseKind::ssn_proxy, 6, 4.0);
    CHECK(n.size() == 64000);
    const auto p = power_spectrum(n);
    const auto& ref = clean_long_term_spectrum();
    // Correlation of the two log spectra.
    std::vector<double> x, y;
    for (std::size_t k = 1; k < 320; ++k) {
        x.push_back(std::log10(p[k]));
        y.push_back(std::log10(ref[k]));
    }
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    CHECK(sxy / std::sqrt(sxx * syy) > 0.9);
}

TEST_CASE("babble is the normalized sum of its talkers") {
    const auto b = gen_noise(NoiseKind::babble_proxy, 8, 0.5);
    std::vector<double> sum(8000, 0.0);
    const auto seeds = babble_component_seeds(8);
    CHECK(std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() == kBabbleTalkers);
    for (auto s : seeds) {
        const auto t = gen_clean(s, 0.5);
        for (std::size_t i = 0; i < 8000; ++i) sum[i] += t.samples[i];
    }
    double m = 0.0;
    for (double v : sum) m = std::max(m, std::abs(v));
    for (std::size_t i = 0; i < 8000; ++i) CHECK(b.samples[i] == doctest::Approx(sum[i] / m).epsilon(1e-12));
}

TEST_CASE("names round trip") {
    for (auto k : {NoiseKind::white, NoiseKind::ssn_proxy, NoiseKind::babble_proxy})
        CHECK(parse_noise_kind(to_string(k)) == k);
    for (auto s : {Split::train, Split::validation, Split::test}) CHECK(parse_split(to_string(s)) == s);
    CHECK_THROWS_AS(parse_noise_kind("pink"), InvalidInput);
    CHECK(default_snr_grid() == std::vector<double>{-20, -15, -10, -5, 0, 5, 10, 15, 20});
    CHECK(default_test_snr_grid() == std::vector<double>{-15, -10, -5, 0, 5, 10, 15});
}

TEST_CASE("material seeds separate splits and roles") {
    CHECK(material_seed(3, Split::train, 0, 0) == (std::uint64_t{3} << 32));
    CHECK(material_seed(3, Split::validation, 1, 5) == (std::uint64_t{3} << 32) + (std::uint64_t{1} << 28) + (std::uint64_t{1} << 26) + 5);
    CHECK(material_seed(std::uint64_t{1} << 32, Split::test, 0, 0) == (std::uint64_t{2} << 28));
    CHECK_THROWS_AS(material_seed(0, Split::train, 0, std::size_t{1} << 26), InvalidInput);
}

TEST_CASE("envelope aux quantizes frame energy against the loudest frame") {
    dsp::MagnitudeSpectrogram mag{Matrix(1, 22, 0.0)};
    const double db[] = {0.0, -7.5, -30.0, -59.0, -61.0};
    for (std::size_t l = 0; l < 5; ++l) mag.values(0, l) = std::sqrt(std::pow(10.0, db[l] / 10.0));
    mag.values(0, 21) = 1.0;
    const auto aux = envelope_aux(mag);
    REQUIRE(aux.size() == 2);
    REQUIRE(aux[0].size() == 20);
    CHECK(aux[0][0] == 1.0);
    CHECK(aux[0][1] == 1.0);
    CHECK(aux[0][2] == doctest::Approx(4.0 / 7.0));
    CHECK(aux[0][3] == 0.0);
    CHECK(aux[0][4] == 0.0);
    CHECK(aux[0][5] == 0.0);  // silent frame
    CHECK(aux[1][1] == 1.0);
    CHECK(aux[1][2] == 0.0);  // padding
}

TEST_CASE("cartesian dataset: counts, seeds, SNRs and examples") {
    const auto ds = build_dataset(small_spec());
    REQUIRE(ds.train.size() == 30);
    CHECK(ds.validation.size() == 6);
    CHECK(ds.test.size() == 12);
    std::set<std::uint64_t> clean, noise;
    for (const auto* split : {&ds.train, &ds.validation, &ds.test})
        for (const auto& rec : *split) {
            CHECK(std::abs(signal::measured_snr_db(rec.mixture) - rec.mixture.snr_db) < 0.01);
            CHECK(peak(rec.mixture.noisy) == doctest::Approx(1.0));
            CHECK(rec.mixture.noisy.size() == 4800);
            clean.insert(rec.clean_seed);
            noise.insert(rec.noise_seed);
            CHECK(rec.aux.size() == 2);
        }
    CHECK(clean.size() == 14);
    CHECK(noise.size() == 42);
    for (auto s : clean) CHECK(noise.count(s) == 0);
    CHECK(ds.train[4].utterance == 1);
    CHECK(ds.train[4].noise_kind == NoiseKind::ssn_proxy);
    CHECK(ds.train[0].examples.size() == 1);  // 27 frames
    CHECK(ds.test[0].examples.empty());
    CHECK(ds.test[0].mixture.snr_db == -5.0);
    CHECK(ds.test[1].mixture.snr_db == 0.0);
    CHECK(collect_examples(ds.train).size() == 30);
}

TEST_CASE("round-robin pairing") {
    auto spec = small_spec();
    spec.snr_grid_db = {-5.0, 0.0, 5.0};
    spec.train_pairing = Pairing::round_robin;
    spec.test_pairing = Pairing::round_robin;
    spec.with_aux = false;
    const auto ds = build_dataset(spec);
    REQUIRE(ds.train.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(ds.train[i].utterance == i);
        CHECK(ds.train[i].mixture.snr_db == spec.snr_grid_db[i % 3]);
        CHECK(ds.train[i].noise_kind == spec.noise_kinds[(i / 3) % 3]);
        CHECK(ds.train[i].aux.empty());
        CHECK(ds.train[i].examples[0].aux.empty());
    }
    CHECK(ds.test.size() == 2);
}

TEST_CASE("examples slice the STFT of the stored mixture") {
    const auto ds = build_dataset(small_spec());
    const auto& rec = ds.train[7];
    const auto r = dsp::magnitude(dsp::stft(rec.mixture.noisy)).values;
    const auto a = dsp::magnitude(dsp::stft(rec.mixture.clean)).values;
    const auto& ctx = rec.examples[0].context;
    for (std::size_t k = 0; k < 321; k += 16)
        for (std::size_t l = 0; l < 20; ++l) {
            CHECK(ctx.noisy()(k, l) == r(k, l));
            CHECK(ctx.clean()(k, l) == a(k, l));
        }
    CHECK(rec.examples[0].aux == rec.aux[0]);
}

TEST_CASE("regeneration is bit identical") {
    const auto a = build_dataset(small_spec());
    const auto b = build_dataset(small_spec());
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].mixture.noisy.samples == b.train[i].mixture.noisy.samples);
        CHECK(a.train[i].examples[0].context.theta() == b.train[i].examples[0].context.theta());
    }
    auto other = small_spec();
    other.seed = 10;
    CHECK(build_dataset(other).train[0].mixture.noisy.samples != a.train[0].mixture.noisy.samples);
}

TEST_CASE("dataset errors") {
    auto spec = small_spec();
    spec.snr_grid_db.clear();
    CHECK_THROWS_AS(build_dataset(spec), InvalidInput);
    spec = small_spec();
    spec.num_validation_utterances = 0;
    CHECK_THROWS_AS(build_dataset(spec), InvalidInput);
    spec = small_spec();
    spec.utterance_seconds = 0.1;
    CHECK_THROWS_AS(build_dataset(spec), InvalidInput);
}

}

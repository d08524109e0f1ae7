#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>

#include "selab/checkpoint.hpp"
#include "support.hpp"

using namespace selab;
using namespace selab::estimator;

namespace {

EstimatorModel sample_model() {
    const ChunkShape shape{3, 2, 2};
    const std::size_t hidden[] = {4, 5};
    auto m = init_model(layer_sizes_for(shape, hidden), objectives::Activation::linear, 11, shape);
    std::mt19937_64 rng(61);
    for (auto& layer : m.layers)
        for (double& b : layer.bias) b = std::normal_distribution<double>(0, 1)(rng);
    for (std::size_t j = 0; j < m.input_size(); ++j) {
        m.input_norm.mean[j] = std::normal_distribution<double>(0, 1e-3)(rng);
        m.input_norm.std[j] = 0.1 + std::exp(std::normal_distribution<double>(0, 3)(rng));
    }
    m.objective = objectives::ObjectiveId{objectives::Domain::pssa, objectives::Approach::im};
    return m;
}

std::string header_of(const std::vector<std::uint8_t>& bytes) {
    const std::string s(bytes.begin(), bytes.end());
    return s.substr(0, s.find("end_header\n") + 11);
}

} // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("round trip is bit exact") {
    const auto m = sample_model();
    const auto bytes = checkpoint::serialize(m);
    const auto back = checkpoint::deserialize(bytes);
    CHECK(back == m);
    CHECK(checkpoint::serialize(back) == bytes);

    const auto path = std::filesystem::temp_directory_path() / "selab_ckpt_test.bin";
    checkpoint::save(path, m);
    CHECK(checkpoint::load(path) == m);
    std::filesystem::remove(path);
}

TEST_CASE("header is self describing") {
    const auto m = sample_model();
    const auto h = header_of(checkpoint::serialize(m));
    CHECK(h.rfind("selab-checkpoint 1\n", 0) == 0);
    CHECK(h.find("objective pssa-im\n") != std::string::npos);
    CHECK(h.find("output_activation linear\n") != std::string::npos);
    CHECK(h.find("hidden_activation leaky_rectifier 0.01\n") != std::string::npos);
    CHECK(h.find("chunk 3 2\n") != std::string::npos);
    CHECK(h.find("aux_dim 2\n") != std::string::npos);
    CHECK(h.find("layers 3 8 4 5 6\n") != std::string::npos);
    CHECK(h.find("parameters " + std::to_string(m.num_parameters()) + "\n") != std::string::npos);
}

TEST_CASE("parameters follow the header as little-endian doubles, weights then bias") {
    const auto m = sample_model();
    const auto bytes = checkpoint::serialize(m);
    const std::size_t start = header_of(bytes).size();
    REQUIRE(bytes.size() == start + 8 * m.num_parameters());
    auto at = [&](std::size_t i) {
        std::uint64_t u = 0;
        for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(bytes[start + 8 * i + b]) << (8 * b);
        double d;
        std::memcpy(&d, &u, 8);
        return d;
    };
    CHECK(at(0) == m.layers[0].weights(0, 0));
    CHECK(at(1) == m.layers[0].weights(0, 1));
    CHECK(at(m.layers[0].weights.size()) == m.layers[0].bias[0]);
    CHECK(at(m.num_parameters() - 1) == m.layers.back().bias.back());
}

TEST_CASE("model without objective") {
    auto m = sample_model();
    m.objective.reset();
    CHECK(checkpoint::deserialize(checkpoint::serialize(m)) == m);
}

TEST_CASE("malformed checkpoints are rejected") {
    const auto good = checkpoint::serialize(sample_model());
    auto replace = [&](const std::string& from, const std::string& to) {
        std::string s(good.begin(), good.end());
        s.replace(s.find(from), from.size(), to);
        return std::vector<std::uint8_t>(s.begin(), s.end());
    };
    CHECK_THROWS_AS(checkpoint::deserialize(replace("selab-checkpoint 1", "selab-checkpoint 2")), FormatError);
    CHECK_THROWS_AS(checkpoint::deserialize(replace("selab-checkpoint", "other-checkpoint")), FormatError);
    CHECK_THROWS_AS(checkpoint::deserialize(replace("objective pssa-im", "objective lsa-ma")), std::exception);
    CHECK_THROWS_AS(checkpoint::deserialize(replace("leaky_rectifier 0.01", "leaky_rectifier 0.2")), FormatError);
    CHECK_THROWS_AS(checkpoint::deserialize(replace("layers 3 8 4 5 6", "layers 3 8 4 6 6")), std::exception);
    auto truncated = good;
    truncated.pop_back();
    CHECK_THROWS_AS(checkpoint::deserialize(truncated), FormatError);
    auto trailing = good;
    trailing.push_back(0);
    CHECK_THROWS_AS(checkpoint::deserialize(trailing), FormatError);
    CHECK_THROWS_AS(checkpoint::load("/nonexistent/selab.ckpt"), FormatError);
}

}

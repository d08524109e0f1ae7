#include "selab/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "selab/error.hpp"

namespace selab::checkpoint {
namespace {

constexpr std::string_view kMagic = "selab-checkpoint";
constexpr std::string_view kEndHeader = "end_header\n";

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& token) {
    double v = 0.0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size())
        throw FormatError("checkpoint: bad number '" + token + "'");
    return v;
}

std::size_t parse_size(const std::string& token) {
    std::size_t v = 0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size())
        throw FormatError("checkpoint: bad count '" + token + "'");
    return v;
}

void put_vector(std::ostringstream& out, std::string_view key, const std::vector<double>& values) {
    out << key << ' ' << values.size();
    for (double v : values) out << ' ' << format_double(v);
    out << '\n';
}

void put_doubles(std::vector<std::uint8_t>& out, std::span<const double> values) {
    for (double v : values) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
}

class HeaderReader {
public:
    explicit HeaderReader(const std::string& header) : in_(header) {}

    std::vector<std::string> line(std::string_view key) {
        std::string text;
        if (!std::getline(in_, text)) throw FormatError("checkpoint: header ended before '" + std::string(key) + "'");
        std::istringstream fields(text);
        std::vector<std::string> tokens;
        for (std::string t; fields >> t;) tokens.push_back(t);
        if (tokens.empty() || tokens.front() != key)
            throw FormatError("checkpoint: expected '" + std::string(key) + "', found '" + text + "'");
        tokens.erase(tokens.begin());
        return tokens;
    }

    std::vector<double> vector(std::string_view key) {
        auto tokens = line(key);
        if (tokens.empty()) throw FormatError("checkpoint: missing count for " + std::string(key));
        const std::size_t n = parse_size(tokens[0]);
        if (tokens.size() != n + 1) throw FormatError("checkpoint: " + std::string(key) + " count mismatch");
        std::vector<double> out;
        out.reserve(n);
        for (std::size_t i = 1; i <= n; ++i) out.push_back(parse_double(tokens[i]));
        return out;
    }

private:
    std::istringstream in_;
};

} // namespace

std::vector<std::uint8_t> serialize(const estimator::EstimatorModel& model) {
    estimator::validate(model);
    std::ostringstream header;
    header << kMagic << ' ' << kFormatVersion << '\n';
    header << "objective " << (model.objective ? objectives::to_string(*model.objective) : "none") << '\n';
    header << "output_activation " << objectives::to_string(model.output_activation) << '\n';
    header << "hidden_activation leaky_rectifier " << format_double(estimator::kLeakySlope) << '\n';
    header << "chunk " << model.shape.bins << ' ' << model.shape.frames << '\n';
    header << "aux_dim " << model.shape.aux_dim << '\n';
    const auto sizes = model.layer_sizes();
    header << "layers " << model.layers.size();
    for (auto s : sizes) header << ' ' << s;
    header << '\n';
    put_vector(header, "norm_mean", model.input_norm.mean);
    put_vector(header, "norm_std", model.input_norm.std);
    header << "parameters " << model.num_parameters() << '\n';
    header << kEndHeader;

    const std::string text = header.str();
    std::vector<std::uint8_t> out(text.begin(), text.end());
    out.reserve(out.size() + 8 * model.num_parameters());
    for (const auto& layer : model.layers) {
        put_doubles(out, layer.weights.flat());
        put_doubles(out, layer.bias);
    }
    return out;
}

estimator::EstimatorModel deserialize(const std::vector<std::uint8_t>& bytes) {
    const std::string_view view(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    const auto end = view.find(kEndHeader);
    if (!view.starts_with(kMagic) || end == std::string_view::npos)
        throw FormatError("checkpoint: not a selab checkpoint");
    HeaderReader header{std::string(view.substr(0, end))};

    const auto magic = header.line(kMagic);
    if (magic.size() != 1 || parse_size(magic[0]) != static_cast<std::size_t>(kFormatVersion))
        throw FormatError("checkpoint: unsupported format version");
    estimator::EstimatorModel model;
    const auto objective = header.line("objective");
    if (objective.size() != 1) throw FormatError("checkpoint: malformed objective line");
    if (objective[0] != "none") model.objective = objectives::parse_objective(objective[0]);
    const auto act = header.line("output_activation");
    if (act.size() != 1) throw FormatError("checkpoint: malformed output_activation line");
    model.output_activation = objectives::parse_activation(act[0]);
    const auto hidden = header.line("hidden_activation");
    if (hidden.size() != 2 || hidden[0] != "leaky_rectifier" || parse_double(hidden[1]) != estimator::kLeakySlope)
        throw FormatError("checkpoint: unsupported hidden activation");
    const auto chunk = header.line("chunk");
    if (chunk.size() != 2) throw FormatError("checkpoint: malformed chunk line");
    model.shape.bins = parse_size(chunk[0]);
    model.shape.frames = parse_size(chunk[1]);
    const auto aux = header.line("aux_dim");
    if (aux.size() != 1) throw FormatError("checkpoint: malformed aux_dim line");
    model.shape.aux_dim = parse_size(aux[0]);
    const auto layers = header.line("layers");
    if (layers.empty() || layers.size() != parse_size(layers[0]) + 2)
        throw FormatError("checkpoint: malformed layers line");
    std::vector<std::size_t> sizes;
    for (std::size_t i = 1; i < layers.size(); ++i) sizes.push_back(parse_size(layers[i]));
    model.input_norm.mean = header.vector("norm_mean");
    model.input_norm.std = header.vector("norm_std");
    const auto params = header.line("parameters");
    if (params.size() != 1) throw FormatError("checkpoint: malformed parameters line");

    std::size_t pos = end + kEndHeader.size();
    auto next = [&]() {
        if (pos + 8 > bytes.size()) throw FormatError("checkpoint: parameter block truncated");
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[pos + static_cast<std::size_t>(i)]) << (8 * i);
        pos += 8;
        return std::bit_cast<double>(bits);
    };
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        estimator::DenseLayer layer{Matrix(sizes[l], sizes[l + 1]), std::vector<double>(sizes[l + 1])};
        for (double& w : layer.weights.flat()) w = next();
        for (double& b : layer.bias) b = next();
        model.layers.push_back(std::move(layer));
    }
    if (pos != bytes.size()) throw FormatError("checkpoint: trailing bytes after parameters");
    if (model.num_parameters() != parse_size(params[0])) throw FormatError("checkpoint: parameter count mismatch");
    estimator::validate(model);
    return model;
}

void save(const std::filesystem::path& path, const estimator::EstimatorModel& model) {
    const auto bytes = serialize(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("checkpoint: cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

estimator::EstimatorModel load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("checkpoint: cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

} // namespace selab::checkpoint

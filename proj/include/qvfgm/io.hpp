#pragma once

// File formats: dataset CSV, key = value run configuration and model files,
// persisted posterior samples (CSV per parameter plus a JSON manifest), and
// the network export (DOT and JSON).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "qvfgm/family.hpp"
#include "qvfgm/inference.hpp"
#include "qvfgm/model.hpp"

namespace qvfgm::io {

namespace fs = std::filesystem;
using nlohmann::json;

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kSamplesFormatVersion = 1;

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '\n')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

/// Shortest text that parses back to the identical double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

inline std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------- datasets

/// Parses CSV text: one replicate per row, optional header of node names.
/// Values are not checked against any family.
inline Dataset parse_dataset(const std::string& text) {
  Dataset data;
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  int line_no = 0;
  bool first = true;
  for (const auto& raw : detail::lines(text)) {
    ++line_no;
    std::string_view line = detail::trim(raw);
    if (line.empty()) continue;
    if (first && line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.remove_prefix(3);  // BOM
    const auto fields = detail::split(line, ',');
    if (first) {
      first = false;
      width = fields.size();
      const bool numeric = std::all_of(fields.begin(), fields.end(), [](auto f) { return detail::parse_double(f).has_value(); });
      if (!numeric) {
        for (auto f : fields) {
          std::string name(f);
          if (name.size() >= 2 && name.front() == '"' && name.back() == '"') name = name.substr(1, name.size() - 2);
          data.node_names.push_back(name);
        }
        continue;
      }
    }
    if (fields.size() != width) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(width) + " columns, found " +
                       std::to_string(fields.size()));
    }
    std::vector<double> row;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto v = detail::parse_double(fields[c]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError("line " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                         ": not a number: '" + std::string(fields[c]) + "'");
      }
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("dataset has no data rows");
  data.y.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j) data.y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  if (data.node_names.empty()) data.node_names = default_node_names(static_cast<int>(width));
  return data;
}

/// Loads and validates a dataset against the family's mean space.
inline Dataset load_dataset(const fs::path& path, FamilyKind family) {
  Dataset data = parse_dataset(detail::read_file(path));
  data.validate(family);
  return data;
}

inline std::string format_dataset(const Dataset& data) {
  std::string out;
  const auto names = data.node_names.empty() ? default_node_names(data.nodes()) : data.node_names;
  for (std::size_t j = 0; j < names.size(); ++j) out += (j ? "," : "") + names[j];
  out += '\n';
  for (int i = 0; i < data.replicates(); ++i) {
    for (int j = 0; j < data.nodes(); ++j) out += (j ? "," : "") + detail::format_double(data.y(i, j));
    out += '\n';
  }
  return out;
}

inline void save_dataset(const fs::path& path, const Dataset& data) { detail::write_file(path, format_dataset(data)); }

/// Centre and scale each column to unit sample standard deviation (n - 1
/// denominator), then add 3.
inline Dataset preprocess_standardize_plus3(const Dataset& data) {
  const int n = data.replicates();
  if (n < 2) throw std::invalid_argument("standardization needs at least two replicates");
  Dataset out = data;
  for (int j = 0; j < data.nodes(); ++j) {
    const double m = data.y.col(j).mean();
    const double sd = std::sqrt((data.y.col(j).array() - m).square().sum() / (n - 1.0));
    if (!(sd > 0.0)) throw std::invalid_argument("column " + std::to_string(j + 1) + " has zero variance");
    out.y.col(j) = ((data.y.col(j).array() - m) / sd + 3.0).matrix();
  }
  return out;
}

/// y -> 1/y, for inverse gamma data supplied on the reciprocal scale.
inline Dataset reciprocal_transform(const Dataset& data) {
  if ((data.y.array() <= 0.0).any()) throw DomainError("reciprocal transform needs positive data");
  Dataset out = data;
  out.y = data.y.cwiseInverse();
  return out;
}

// ---------------------------------------------------------------- key = value

using KeyValues = std::map<std::string, std::string>;

inline KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  int line_no = 0;
  for (const auto& raw : detail::lines(text)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("line " + std::to_string(line_no) + ": expected key = value");
    const auto key = detail::trim(line.substr(0, eq));
    if (key.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty key");
    kv[std::string(key)] = std::string(detail::trim(line.substr(eq + 1)));
  }
  return kv;
}

namespace detail {

inline double to_double(const std::string& key, const std::string& value) {
  const auto v = parse_double(value);
  if (!v) throw ParseError("'" + key + "' expects a number, got '" + value + "'");
  return *v;
}

inline long long to_integer(const std::string& key, const std::string& value) {
  const double v = to_double(key, value);
  if (std::floor(v) != v) throw ParseError("'" + key + "' expects an integer, got '" + value + "'");
  return static_cast<long long>(v);
}

inline bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ParseError("'" + key + "' expects a boolean, got '" + value + "'");
}

inline FamilyKind to_family(const std::string& value) {
  const auto f = parse_family(value);
  if (!f) throw ParseError("unknown family '" + value + "'");
  return *f;
}

}  // namespace detail

struct RunConfig {
  FamilyKind family = FamilyKind::Normal;
  PriorConfig prior = PriorConfig::defaults(FamilyKind::Normal);
  MCMCConfig mcmc;
  std::string input;
  std::string output_dir = "samples";
  bool standardize_plus3 = false;
  bool reciprocal_transform = false;

  /// Applies one `key = value` setting. Unknown keys are errors.
  void set(const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "family") {
      family = to_family(value);
      prior.s0_kind = PriorConfig::s0_kind_for(family);
    } else if (key == "a0") prior.a0 = to_double(key, value);
    else if (key == "b0") prior.b0 = to_double(key, value);
    else if (key == "d0") prior.d0 = to_double(key, value);
    else if (key == "ac") prior.ac = to_double(key, value);
    else if (key == "bc") prior.bc = to_double(key, value);
    else if (key == "mu_s") prior.mu_s = to_double(key, value);
    else if (key == "tau_s") prior.tau_s = to_double(key, value);
    else if (key == "a_s") prior.a_s = to_double(key, value);
    else if (key == "b_s") prior.b_s = to_double(key, value);
    else if (key == "iterations") mcmc.iterations = static_cast<int>(to_integer(key, value));
    else if (key == "burn_in") mcmc.burn_in = static_cast<int>(to_integer(key, value));
    else if (key == "thinning") mcmc.thinning = static_cast<int>(to_integer(key, value));
    else if (key == "chains") mcmc.chains = static_cast<int>(to_integer(key, value));
    else if (key == "seed") mcmc.seed = static_cast<std::uint64_t>(to_integer(key, value));
    else if (key == "step_s0") mcmc.step_s0 = to_double(key, value);
    else if (key == "step_c0") mcmc.step_c0 = to_double(key, value);
    else if (key == "step_edge") mcmc.step_edge = to_double(key, value);
    else if (key == "step_link") mcmc.step_link = to_double(key, value);
    else if (key == "enum_tail_tol") mcmc.enum_tail_tol = to_double(key, value);
    else if (key == "enum_cap") mcmc.enum_cap = static_cast<std::size_t>(to_integer(key, value));
    else if (key == "adapt_window") mcmc.adapt_window = static_cast<int>(to_integer(key, value));
    else if (key == "keep_latents") mcmc.keep_latents = to_bool(key, value);
    else if (key == "joint_moves") mcmc.joint_moves = to_bool(key, value);
    else if (key == "target_accept") mcmc.target_accept = to_double(key, value);
    else if (key == "input") input = value;
    else if (key == "output") output_dir = value;
    else if (key == "standardize_plus3") standardize_plus3 = to_bool(key, value);
    else if (key == "reciprocal_transform") reciprocal_transform = to_bool(key, value);
    else throw ParseError("unknown configuration key '" + key + "'");
  }

  /// Applies a `key=value` override string.
  void apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ParseError("override '" + assignment + "' is not key=value");
    set(std::string(detail::trim(std::string_view(assignment).substr(0, eq))),
        std::string(detail::trim(std::string_view(assignment).substr(eq + 1))));
  }

  static RunConfig parse(const std::string& text) {
    RunConfig cfg;
    const auto kv = parse_key_values(text);
    // The family fixes the s0 prior form, so it goes first.
    if (auto it = kv.find("family"); it != kv.end()) cfg.set(it->first, it->second);
    for (const auto& [k, v] : kv) {
      if (k != "family") cfg.set(k, v);
    }
    return cfg;
  }

  static RunConfig load(const fs::path& path) { return parse(detail::read_file(path)); }

  /// Every field, one `key = value` per line in a fixed order.
  std::string canonical() const {
    using detail::format_double;
    std::ostringstream out;
    out << "family = " << to_string(family) << '\n'
        << "a0 = " << format_double(prior.a0) << '\n'
        << "b0 = " << format_double(prior.b0) << '\n'
        << "d0 = " << format_double(prior.d0) << '\n'
        << "ac = " << format_double(prior.ac) << '\n'
        << "bc = " << format_double(prior.bc) << '\n'
        << "mu_s = " << format_double(prior.mu_s) << '\n'
        << "tau_s = " << format_double(prior.tau_s) << '\n'
        << "a_s = " << format_double(prior.a_s) << '\n'
        << "b_s = " << format_double(prior.b_s) << '\n'
        << "iterations = " << mcmc.iterations << '\n'
        << "burn_in = " << mcmc.burn_in << '\n'
        << "thinning = " << mcmc.thinning << '\n'
        << "chains = " << mcmc.chains << '\n'
        << "seed = " << mcmc.seed << '\n'
        << "step_s0 = " << format_double(mcmc.step_s0) << '\n'
        << "step_c0 = " << format_double(mcmc.step_c0) << '\n'
        << "step_edge = " << format_double(mcmc.step_edge) << '\n'
        << "step_link = " << format_double(mcmc.step_link) << '\n'
        << "enum_tail_tol = " << format_double(mcmc.enum_tail_tol) << '\n'
        << "enum_cap = " << mcmc.enum_cap << '\n'
        << "adapt_window = " << mcmc.adapt_window << '\n'
        << "target_accept = " << format_double(mcmc.target_accept) << '\n'
        << "keep_latents = " << (mcmc.keep_latents ? "true" : "false") << '\n'
        << "joint_moves = " << (mcmc.joint_moves ? "true" : "false") << '\n'
        << "input = " << input << '\n'
        << "output = " << output_dir << '\n'
        << "standardize_plus3 = " << (standardize_plus3 ? "true" : "false") << '\n'
        << "reciprocal_transform = " << (reciprocal_transform ? "true" : "false") << '\n';
    return out.str();
  }

  /// 64-bit FNV-1a of the canonical text, as 16 hex digits.
  std::string hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical()) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }
};

/// Applies the configured preprocessing to a raw dataset, in the order
/// reciprocal then standardize.
inline Dataset prepare_dataset(const Dataset& raw, const RunConfig& cfg) {
  Dataset data = raw;
  if (cfg.reciprocal_transform) data = reciprocal_transform(data);
  if (cfg.standardize_plus3) data = preprocess_standardize_plus3(data);
  data.validate(cfg.family);
  return data;
}

// ---------------------------------------------------------------- model files

/// Model file: family, s0, c0, nodes, optional default_edge, and c_j_k
/// entries with 1-based node indices.
inline ModelParams parse_model(const std::string& text) {
  const auto kv = parse_key_values(text);
  auto need = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ParseError("model file lacks '" + key + "'");
    return it->second;
  };
  ModelParams params;
  params.family = detail::to_family(need("family"));
  params.s0 = detail::to_double("s0", need("s0"));
  params.c0 = detail::to_double("c0", need("c0"));
  const auto p = static_cast<int>(detail::to_integer("nodes", need("nodes")));
  if (p < 2) throw ParseError("model file needs nodes >= 2");
  const double fill = kv.count("default_edge") ? detail::to_double("default_edge", kv.at("default_edge")) : 0.0;
  params.edge_intensity = uniform_intensity(p, fill);
  for (const auto& [key, value] : kv) {
    if (key.rfind("c_", 0) != 0) {
      if (key != "family" && key != "s0" && key != "c0" && key != "nodes" && key != "default_edge") {
        throw ParseError("unknown model key '" + key + "'");
      }
      continue;
    }
    const auto parts = detail::split(std::string_view(key).substr(2), '_');
    if (parts.size() != 2) throw ParseError("edge key '" + key + "' must look like c_j_k");
    const auto j = detail::to_integer(key, std::string(parts[0])) - 1;
    const auto k = detail::to_integer(key, std::string(parts[1])) - 1;
    if (j < 0 || k < 0 || j >= p || k >= p || j == k) throw ParseError("edge key '" + key + "' out of range");
    set_edge(params.edge_intensity, static_cast<int>(j), static_cast<int>(k), detail::to_double(key, value));
  }
  params.validate();
  return params;
}

inline ModelParams load_model(const fs::path& path) { return parse_model(detail::read_file(path)); }

inline std::string format_model(const ModelParams& params) {
  std::ostringstream out;
  out << "family = " << to_string(params.family) << '\n'
      << "s0 = " << detail::format_double(params.s0) << '\n'
      << "c0 = " << detail::format_double(params.c0) << '\n'
      << "nodes = " << params.nodes() << '\n';
  for (auto [j, k] : edge_pairs(params.nodes())) {
    out << edge_name(j, k) << " = " << detail::format_double(params.edge_intensity(j, k)) << '\n';
  }
  return out.str();
}

inline void save_model(const fs::path& path, const ModelParams& params) { detail::write_file(path, format_model(params)); }

// ---------------------------------------------------------------- samples

/// Writes `<param>.csv` (one column per chain), optional `s_star_chain<c>.csv`
/// latents, and `manifest.json`.
inline void persist_samples(const PosteriorSamples& samples, const fs::path& dir, const std::string& config_hash = "",
                            const json& extra = json::object()) {
  fs::create_directories(dir);
  const auto names = samples.parameter_names();
  for (std::size_t idx = 0; idx < names.size(); ++idx) {
    std::string text;
    for (std::size_t c = 0; c < samples.chains.size(); ++c) text += (c ? ",chain" : "chain") + std::to_string(c + 1);
    text += '\n';
    const std::size_t draws = samples.chains.empty() ? 0 : samples.draws(idx, 0).size();
    for (std::size_t d = 0; d < draws; ++d) {
      for (std::size_t c = 0; c < samples.chains.size(); ++c) {
        text += (c ? "," : "") + detail::format_double(samples.draws(idx, c).at(d));
      }
      text += '\n';
    }
    detail::write_file(dir / (names[idx] + ".csv"), text);
  }
  bool latents = false;
  for (std::size_t c = 0; c < samples.chains.size(); ++c) {
    const auto& chain = samples.chains[c];
    if (chain.s_star.empty()) continue;
    latents = true;
    std::string text;
    for (const auto& m : chain.s_star) {
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) text += ((i || j) ? "," : "") + detail::format_double(m(i, j));
      text += '\n';
    }
    detail::write_file(dir / ("s_star_chain" + std::to_string(c + 1) + ".csv"), text);
  }
  json manifest;
  manifest["format_version"] = kSamplesFormatVersion;
  manifest["family"] = std::string(to_string(samples.family));
  manifest["seed"] = samples.seed;
  manifest["config_hash"] = config_hash;
  manifest["iterations"] = samples.iterations;
  manifest["burn_in"] = samples.burn_in;
  manifest["thinning"] = samples.thinning;
  manifest["chains"] = samples.chains.size();
  manifest["node_names"] = samples.node_names;
  manifest["parameters"] = names;
  manifest["latents"] = latents;
  json acc = json::array();
  for (const auto& chain : samples.chains) {
    acc.push_back({{"s0", chain.accept_s0}, {"c0", chain.accept_c0}, {"links", chain.accept_links}, {"edges", chain.accept_edges}});
  }
  manifest["acceptance"] = acc;
  if (!extra.empty()) manifest["run"] = extra;
  detail::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline json load_manifest(const fs::path& dir) {
  json manifest = json::parse(detail::read_file(dir / "manifest.json"));
  const int version = manifest.value("format_version", -1);
  if (version != kSamplesFormatVersion) {
    throw VersionError("samples manifest version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kSamplesFormatVersion) + ")");
  }
  return manifest;
}

inline PosteriorSamples load_samples(const fs::path& dir) {
  const json manifest = load_manifest(dir);
  PosteriorSamples samples;
  samples.family = detail::to_family(manifest.at("family").get<std::string>());
  samples.seed = manifest.at("seed").get<std::uint64_t>();
  samples.iterations = manifest.at("iterations").get<int>();
  samples.burn_in = manifest.at("burn_in").get<int>();
  samples.thinning = manifest.at("thinning").get<int>();
  samples.node_names = manifest.at("node_names").get<std::vector<std::string>>();
  const auto chains = manifest.at("chains").get<std::size_t>();
  samples.chains.resize(chains);
  const auto names = samples.parameter_names();
  if (manifest.at("parameters").get<std::vector<std::string>>() != names) {
    throw ParseError("manifest parameter list does not match its node count");
  }
  for (auto& c : samples.chains) c.edges.resize(names.size() - 2);
  for (std::size_t idx = 0; idx < names.size(); ++idx) {
    const auto text = detail::read_file(dir / (names[idx] + ".csv"));
    const auto rows = detail::lines(text);
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (detail::trim(rows[r]).empty()) continue;
      const auto fields = detail::split(rows[r], ',');
      if (fields.size() != chains) throw ParseError(names[idx] + ".csv: wrong column count on line " + std::to_string(r + 1));
      for (std::size_t c = 0; c < chains; ++c) {
        const auto v = detail::parse_double(fields[c]);
        if (!v) throw ParseError(names[idx] + ".csv: bad number on line " + std::to_string(r + 1));
        auto& chain = samples.chains[c];
        (idx == 0 ? chain.s0 : idx == 1 ? chain.c0 : chain.edges[idx - 2]).push_back(*v);
      }
    }
  }
  const auto& acc = manifest.at("acceptance");
  for (std::size_t c = 0; c < chains; ++c) {
    auto& chain = samples.chains[c];
    chain.accept_s0 = acc.at(c).at("s0").get<double>();
    chain.accept_c0 = acc.at(c).at("c0").get<double>();
    chain.accept_links = acc.at(c).at("links").get<double>();
    chain.accept_edges = acc.at(c).at("edges").get<std::vector<double>>();
  }
  if (manifest.value("latents", false)) {
    const auto p = static_cast<Eigen::Index>(samples.node_names.size());
    for (std::size_t c = 0; c < chains; ++c) {
      const auto path = dir / ("s_star_chain" + std::to_string(c + 1) + ".csv");
      if (!fs::exists(path)) continue;
      for (const auto& row : detail::lines(detail::read_file(path))) {
        if (detail::trim(row).empty()) continue;
        const auto fields = detail::split(row, ',');
        const auto count = static_cast<Eigen::Index>(fields.size());
        if (count % p != 0) throw ParseError(path.string() + ": row length is not a multiple of the node count");
        Eigen::MatrixXd m(count / p, p);
        for (Eigen::Index t = 0; t < count; ++t) {
          const auto v = detail::parse_double(fields[static_cast<std::size_t>(t)]);
          if (!v) throw ParseError(path.string() + ": bad number");
          m(t / p, t % p) = *v;
        }
        samples.chains[c].s_star.push_back(std::move(m));
      }
    }
  }
  return samples;
}

// ---------------------------------------------------------------- network

struct NetworkEdge {
  std::string from, to;
  double raw = 0.0;
  double normalized = 0.0;  // 0..100, two decimals
};

struct NetworkExport {
  std::vector<std::string> labels;
  std::vector<NetworkEdge> edges;  // every pair, lexicographic
  double threshold = 5.0;

  std::vector<NetworkEdge> visible_edges() const {
    std::vector<NetworkEdge> out;
    for (const auto& e : edges)
      if (e.normalized >= threshold) out.push_back(e);
    return out;
  }
};

inline double round2(double x) { return std::round(x * 100.0) / 100.0; }

/// Normalises intensities by their maximum, scales to 100 and rounds to two
/// decimals.
inline NetworkExport build_network(const Eigen::MatrixXd& intensity, std::vector<std::string> labels,
                                   double threshold = 5.0) {
  const int p = static_cast<int>(intensity.rows());
  if (labels.empty()) labels = default_node_names(p);
  if (static_cast<int>(labels.size()) != p) throw std::invalid_argument("label count does not match node count");
  double top = 0.0;
  for (auto [j, k] : edge_pairs(p)) top = std::max(top, intensity(j, k));
  if (!(top > 0.0)) throw std::invalid_argument("network export needs at least one positive intensity");
  NetworkExport net;
  net.labels = std::move(labels);
  net.threshold = threshold;
  for (auto [j, k] : edge_pairs(p)) {
    const double raw = intensity(j, k);
    net.edges.push_back({net.labels[static_cast<std::size_t>(j)], net.labels[static_cast<std::size_t>(k)], raw,
                         raw == top ? 100.0 : round2(100.0 * raw / top)});
  }
  return net;
}

/// Posterior-mean intensities as a symmetric matrix.
inline Eigen::MatrixXd posterior_mean_intensity(const PosteriorSamples& samples) {
  const int p = samples.nodes();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(p, p);
  const auto pairs = edge_pairs(p);
  for (std::size_t e = 0; e < pairs.size(); ++e) set_edge(c, pairs[e].first, pairs[e].second, mean(samples.pooled(e + 2)));
  return c;
}

inline std::string dot_quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out + "\"";
}

inline std::string format_number2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", x);
  return buf;
}

/// Undirected DOT graph; darker gray means a stronger edge (gray0 is black).
inline std::string to_dot(const NetworkExport& net) {
  std::string out = "graph network {\n";
  for (const auto& label : net.labels) out += "  " + dot_quote(label) + ";\n";
  for (const auto& e : net.visible_edges()) {
    const int level = std::clamp(static_cast<int>(std::lround(100.0 - e.normalized)), 0, 100);
    out += "  " + dot_quote(e.from) + " -- " + dot_quote(e.to) + " [weight=" + format_number2(e.normalized) +
           ", color=gray" + std::to_string(level) + "];\n";
  }
  return out + "}\n";
}

inline json to_json(const NetworkExport& net) {
  json j;
  j["nodes"] = net.labels;
  j["threshold"] = net.threshold;
  auto edge = [](const NetworkEdge& e) { return json{{"from", e.from}, {"to", e.to}, {"raw", e.raw}, {"normalized", e.normalized}}; };
  j["edges"] = json::array();
  j["hidden"] = json::array();
  for (const auto& e : net.edges) (e.normalized >= net.threshold ? j["edges"] : j["hidden"]).push_back(edge(e));
  return j;
}

/// Writes `<prefix>.dot` and `<prefix>.json`.
inline void export_network(const NetworkExport& net, const fs::path& prefix) {
  detail::write_file(fs::path(prefix.string() + ".dot"), to_dot(net));
  detail::write_file(fs::path(prefix.string() + ".json"), to_json(net).dump(2) + "\n");
}

}  // namespace qvfgm::io

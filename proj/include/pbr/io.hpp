#pragma once

// File formats.
//
//   trials    JSON lines  {"i":1,"x":0,"y":1,"a":0,"b":1}
//   counts    TSV, header "x y a b n", all 16 cells
//   behavior  {"scenario":[2,2,2],"p":{"x,y":[[p00,p01],[p10,p11]],...}}
//   ratios    {"r":{"x,y":[[r00,r01],[r10,r11]],...},"certified_bound":m}
//
// Non-finite numbers are written as the strings "inf", "-inf" and "nan".

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "pbr/engine.hpp"
#include "pbr/errors.hpp"
#include "pbr/scenario.hpp"
#include "pbr/simulator.hpp"

namespace pbr::io {

using nlohmann::json;

inline json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline double to_number(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw ValidationError("expected a number, got " + j.dump());
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  return out;
}

// ---- trials

inline void write_trials(std::ostream& out, const TrialSequence& seq) {
  for (const auto& t : seq)
    out << "{\"i\":" << t.index << ",\"x\":" << int(t.x) << ",\"y\":" << int(t.y) << ",\"a\":" << int(t.a)
        << ",\"b\":" << int(t.b) << "}\n";
}

inline TrialSequence read_trials(std::istream& in) {
  std::vector<Trial> trials;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      Trial t;
      t.index = j.at("i").get<std::int64_t>();
      const std::pair<const char*, std::uint8_t*> fields[] = {{"x", &t.x}, {"y", &t.y}, {"a", &t.a}, {"b", &t.b}};
      for (auto [key, field] : fields) {
        const int v = j.at(key).get<int>();
        if (v < 0 || v > 1) throw ValidationError(std::string("field '") + key + "' outside {0,1}");
        *field = static_cast<std::uint8_t>(v);
      }
      trials.push_back(t);
    } catch (const json::exception& e) {
      throw ValidationError("trials line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("trials line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return TrialSequence(std::move(trials));
}

// ---- counts

inline void write_counts(std::ostream& out, const CountsTable& c) {
  out << "x\ty\ta\tb\tn\n";
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) out << x << '\t' << y << '\t' << a << '\t' << b << '\t' << c(a, b, x, y) << '\n';
}

inline CountsTable read_counts(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("counts file is empty");
  {
    std::istringstream hs(line);
    std::string h, joined;
    while (hs >> h) joined += h + " ";
    if (joined != "x y a b n ") throw ValidationError("counts header must be 'x y a b n'");
  }
  std::array<std::uint64_t, kCells> n{};
  std::array<bool, kCells> seen{};
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    long long x, y, a, b;
    std::string count;
    if (!(ls >> x >> y >> a >> b >> count) || count.find_first_not_of("0123456789") != std::string::npos)
      throw ValidationError("counts line " + std::to_string(lineno) + ": expected 'x y a b n'");
    if (x < 0 || x > 1 || y < 0 || y > 1 || a < 0 || a > 1 || b < 0 || b > 1)
      throw ValidationError("counts line " + std::to_string(lineno) + ": symbol outside {0,1}");
    const int c = cell_index(int(x), int(y), int(a), int(b));
    if (seen[c]) throw ValidationError("counts line " + std::to_string(lineno) + ": duplicate cell");
    seen[c] = true;
    n[c] = std::stoull(count);
  }
  for (bool s : seen)
    if (!s) throw ValidationError("counts file must list all 16 cells");
  return CountsTable::from_table(n);
}

// ---- per-setting tables

inline json cell_table_json(const CellTable& t) {
  json p = json::object();
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) {
      json rows = json::array();
      for (int a = 0; a < 2; ++a)
        rows.push_back({number(t[cell_index(x, y, a, 0)]), number(t[cell_index(x, y, a, 1)])});
      p[setting_key(x, y)] = rows;
    }
  return p;
}

inline CellTable cell_table_from_json(const json& p) {
  CellTable t{};
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) {
      const auto key = setting_key(x, y);
      if (!p.contains(key)) throw ValidationError("missing setting '" + key + "'");
      const auto& rows = p.at(key);
      if (!rows.is_array() || rows.size() != 2) throw ValidationError("setting '" + key + "' must be a 2x2 array");
      for (int a = 0; a < 2; ++a) {
        if (!rows[a].is_array() || rows[a].size() != 2)
          throw ValidationError("setting '" + key + "' must be a 2x2 array");
        for (int b = 0; b < 2; ++b) t[cell_index(x, y, a, b)] = to_number(rows[a][b]);
      }
    }
  return t;
}

inline json behavior_json(const Behavior& b) { return {{"scenario", {2, 2, 2}}, {"p", cell_table_json(b.table())}}; }

inline Behavior behavior_from_json(const json& j) {
  try {
    const auto sc = j.at("scenario").get<std::vector<int>>();
    if (sc != std::vector<int>{2, 2, 2})
      throw UnsupportedScenario("only the (2,2,2) scenario is supported, got " + j.at("scenario").dump());
    return Behavior::from_table(cell_table_from_json(j.at("p")), kSolverTol);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("behavior file: ") + e.what());
  }
}

inline Behavior read_behavior(std::istream& in) {
  try {
    return behavior_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("behavior file: ") + e.what());
  }
}

inline json ratio_json(const RatioTable& r) {
  return {{"r", cell_table_json(r.r)}, {"certified_bound", number(r.certified_bound)}, {"raw_bound", number(r.raw_bound)}};
}

inline RatioTable ratio_from_json(const json& j) {
  try {
    RatioTable r;
    r.r = cell_table_from_json(j.at("r"));
    r.certified_bound = to_number(j.at("certified_bound"));
    r.raw_bound = j.contains("raw_bound") ? to_number(j.at("raw_bound")) : r.certified_bound;
    for (double v : r.r)
      if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("ratios must be finite and nonnegative");
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("ratio file: ") + e.what());
  }
}

inline json input_distribution_json(const InputDistribution& d) {
  json j = json::object();
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) j[setting_key(x, y)] = d(x, y);
  return j;
}

// ---- reports

inline json report_json(const AnalysisReport& r) {
  json j;
  j["hypothesis"] = to_string(r.hypothesis);
  j["n_est"] = r.n_est;
  j["n_test"] = r.n_test;
  j["log10_t"] = number(r.log10_t);
  j["p_bound"] = number(r.p_bound);
  j["certified_bound"] = number(r.certified_bound);
  j["divergence_bits"] = number(r.divergence_bits);
  j["ns_check_max_violation"] = number(r.ns_check_max_violation);
  j["assumed_input_distribution"] = input_distribution_json(r.assumed_input_distribution);
  j["shrinkage_eta"] = number(r.shrinkage_eta);
  j["adaptive_block"] = r.adaptive_block > 0 ? json(r.adaptive_block) : json(nullptr);
  j["raw_bound"] = number(r.raw_bound);
  j["solver_gap_bits"] = number(r.solver_gap_bits);
  j["trial_ordering_available"] = r.trial_ordering_available;
  json settings = json::array();
  for (int s = 0; s < kSettings; ++s) {
    const auto& d = r.settings[s];
    settings.push_back({{"setting", setting_key(s / 2, s % 2)},
                        {"train_count", d.train_count},
                        {"test_count", d.test_count},
                        {"fallback", d.fallback},
                        {"log10_t_share", number(d.log10_t_share)}});
  }
  j["settings"] = settings;
  j["training_frequencies"] = behavior_json(r.training_frequencies);
  j["minimizer"] = behavior_json(r.minimizer);
  j["ratios"] = ratio_json(r.ratios);
  json blocks = json::array();
  for (const auto& b : r.blocks)
    blocks.push_back({{"first", b.first},
                      {"last", b.last},
                      {"log10_t", number(b.log10_t)},
                      {"raw_bound", number(b.raw_bound)},
                      {"divergence_bits", number(b.divergence_bits)}});
  j["blocks"] = blocks;
  return j;
}

inline json source_json(const SourceSpec& s) {
  json j{{"mode", to_string(s.mode)}, {"v", s.v}, {"epsilon", s.epsilon}, {"seed", s.seed}};
  if (s.noise_weights)
    j["noise_weights"] = *s.noise_weights;
  else
    j["noise_weights"] = "canonical";
  return j;
}

inline const std::array<const char*, kBins> kBinLabels = {"<=1e-10", "<=1e-4", "<=1e-2", "<=1e-1", "trivial"};

inline json batch_summary_json(const BatchSummary& s) {
  json j;
  j["rng"] = s.rng;
  j["seed_rule"] = "seed_e = seed xor e";
  j["source"] = source_json(s.source);
  j["input_distribution"] = input_distribution_json(s.input_distribution);
  j["n_experiments"] = s.n_experiments;
  j["n_total"] = s.n_total;
  json rows = json::array();
  for (const auto& r : s.rows) {
    json bins = json::object();
    for (int k = 0; k < kBins; ++k) bins[kBinLabels[k]] = r.fraction(k, s.n_experiments);
    rows.push_back({{"hypothesis", r.label}, {"bins", bins}, {"smallest_p_bound", number(r.smallest_p_bound)}});
  }
  j["rows"] = rows;
  return j;
}

/// One line per experiment: seed and the key numbers of each report.
inline void write_batch_records(std::ostream& out, const BatchSummary& s) {
  for (const auto& rec : s.records) {
    json j{{"experiment", rec.experiment}, {"seed", rec.seed}};
    json reps = json::array();
    for (const auto& r : rec.reports)
      reps.push_back({{"hypothesis", to_string(r.hypothesis)},
                      {"n_est", r.n_est},
                      {"n_test", r.n_test},
                      {"log10_t", number(r.log10_t)},
                      {"p_bound", number(r.p_bound)},
                      {"certified_bound", number(r.certified_bound)},
                      {"raw_bound", number(r.raw_bound)},
                      {"divergence_bits", number(r.divergence_bits)}});
    j["reports"] = reps;
    out << j.dump() << '\n';
  }
}

/// Human-readable table with the cumulative bins, values rounded to 3 digits.
inline std::string render_batch_table(const BatchSummary& s) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  os << "hypothesis";
  for (const auto* l : kBinLabels) os << '\t' << l;
  os << "\tsmallest\n";
  for (const auto& r : s.rows) {
    os << r.label;
    for (int k = 0; k < kBins; ++k) os << '\t' << r.fraction(k, s.n_experiments);
    std::ostringstream sm;
    sm.precision(3);
    sm << r.smallest_p_bound;
    os << '\t' << sm.str() << '\n';
  }
  return os.str();
}

}  // namespace pbr::io

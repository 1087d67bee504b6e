// pbr: p-value bounds for Bell tests from prediction-based ratios.
//
// Subcommands: simulate, analyze, membership, visibility, batch.
// Exit codes: 0 success, 1 analysis or solver failure, 2 input or validation failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "pbr/engine.hpp"
#include "pbr/hypothesis_sets.hpp"
#include "pbr/io.hpp"
#include "pbr/simulator.hpp"

namespace {

using pbr::io::json;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<double> parse_doubles(const std::string& s, std::size_t expected, const std::string& what) {
  std::vector<double> v;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw pbr::ValidationError(what + ": '" + item + "' is not a number");
    }
  }
  if (v.size() != expected)
    throw pbr::ValidationError(what + ": expected " + std::to_string(expected) + " comma-separated values");
  return v;
}

pbr::InputDistribution parse_input_distribution(const std::string& s) {
  if (s == "uniform") return pbr::InputDistribution::uniform();
  const auto v = parse_doubles(s, pbr::kSettings, "--input-dist");
  return pbr::InputDistribution::from_table({v[0], v[1], v[2], v[3]});
}

// key=value lines become "--key value" arguments placed before the command
// line ones, which therefore take precedence.
std::vector<std::string> config_file_args(const std::string& path) {
  auto in = pbr::io::open_input(path);
  std::vector<std::string> args;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw pbr::ValidationError(path + ":" + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    for (char& c : key)
      if (c == '_') c = '-';
    args.push_back("--" + key);
    args.push_back(value);
  }
  return args;
}

json resolved_options(const CLI::App* sub, const std::string& config_path) {
  json j = json::object();
  if (!config_path.empty()) j["config"] = config_path;
  for (const auto* opt : sub->get_options()) {
    const auto name = opt->get_single_name();
    if (name.empty() || name == "help") continue;
    const auto res = opt->reduced_results();
    std::string value;
    if (!res.empty()) {
      for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
    } else {
      value = opt->get_default_str();
    }
    j[name] = value;
  }
  return j;
}

struct SourceOptions {
  std::string mode = "iid";
  double v = 0.72;
  double epsilon = 0.01;
  std::string noise = "canonical";
  std::uint64_t noise_seed = 0;
  std::uint64_t seed = 0;
  std::string input_dist = "uniform";

  void add_to(CLI::App* sub) {
    sub->add_option("--mode", mode, "iid or trialwise");
    sub->add_option("--v", v, "PR-box weight");
    sub->add_option("--epsilon", epsilon, "weight of the vertex noise");
    sub->add_option("--noise", noise, "canonical, random, or 24 comma-separated vertex weights");
    sub->add_option("--noise-seed", noise_seed, "seed of --noise random");
    sub->add_option("--seed", seed, "64-bit RNG seed");
    sub->add_option("--input-dist", input_dist, "uniform or P00,P01,P10,P11");
  }

  pbr::SourceSpec spec() const {
    pbr::SourceSpec s;
    s.mode = pbr::parse_source_mode(mode);
    s.v = v;
    s.epsilon = epsilon;
    s.seed = seed;
    if (noise == "random") {
      s.noise_weights = pbr::random_noise_weights(noise_seed);
    } else if (noise != "canonical") {
      const auto w = parse_doubles(noise, pbr::kNoiseVertices, "--noise");
      pbr::NoiseWeights nw;
      std::copy(w.begin(), w.end(), nw.begin());
      s.noise_weights = nw;
    }
    s.validate();
    return s;
  }
};

struct PipelineOptions {
  std::string hypotheses = "local";
  std::int64_t n_est = 0;
  double train_fraction = pbr::kDefaultTrainFraction;
  double eta = -1.0;
  std::int64_t adaptive_block = 0;

  void add_to(CLI::App* sub) {
    sub->add_option("--hypothesis", hypotheses, "comma-separated list of local, ns, q1, aq");
    sub->add_option("--n-est", n_est, "training trials (overrides --train-fraction)");
    sub->add_option("--train-fraction", train_fraction, "share of trials used for training");
    sub->add_option("--eta", eta, "frequency shrinkage toward white noise (default 1/(n_est+1))");
    sub->add_option("--adaptive-block", adaptive_block, "retrain before every block of this many test trials");
  }

  std::vector<pbr::AnalysisConfig> configs(const pbr::InputDistribution& dist) const {
    std::vector<pbr::AnalysisConfig> out;
    for (const auto& h : split_list(hypotheses)) {
      pbr::AnalysisConfig c;
      c.hypothesis = pbr::parse_set_kind(h);
      if (n_est > 0) c.n_est = n_est;
      c.train_fraction = train_fraction;
      if (eta >= 0.0) c.shrinkage_eta = eta;
      c.adaptive_block = adaptive_block;
      c.input_distribution = dist;
      c.validate();
      out.push_back(c);
    }
    if (out.empty()) throw pbr::ValidationError("--hypothesis names no set");
    return out;
  }
};

void write_json_file(const std::string& path, const json& j) {
  auto out = pbr::io::open_output(path);
  out << j.dump(2) << '\n';
}

int run(int argc, char** argv) {
  CLI::App app{"p-value bounds for Bell tests from prediction-based ratios"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
  std::string config_path;
  app.add_option("--config", config_path, "key=value file with defaults for the subcommand's flags");

  // simulate
  auto* sim = app.add_subcommand("simulate", "sample a trial sequence (JSON lines)");
  SourceOptions sim_src;
  std::int64_t sim_trials = 0;
  std::string sim_out, sim_behavior_out;
  sim_src.add_to(sim);
  sim->add_option("--trials", sim_trials, "number of trials")->required();
  sim->add_option("--out", sim_out, "trial file (default: stdout)");
  sim->add_option("--behavior-out", sim_behavior_out, "also write the source behavior here");

  // analyze
  auto* ana = app.add_subcommand("analyze", "bound the p-value of each hypothesis");
  PipelineOptions ana_pipe;
  std::string ana_trials, ana_train, ana_test, ana_out_dir, ana_input_dist = "uniform";
  ana_pipe.add_to(ana);
  ana->add_option("--trials", ana_trials, "trial file (JSON lines)");
  ana->add_option("--counts-train", ana_train, "training counts (TSV)");
  ana->add_option("--counts-test", ana_test, "test counts (TSV)");
  ana->add_option("--input-dist", ana_input_dist, "assumed input distribution: uniform or P00,P01,P10,P11");
  ana->add_option("--out-dir", ana_out_dir, "write report_<hypothesis>.json here (default: JSON lines on stdout)");

  // membership / visibility
  std::string mem_behavior, mem_set = "local", mem_json;
  double mem_tol = 1e-7;
  auto* mem = app.add_subcommand("membership", "test whether a behavior lies in a set");
  mem->add_option("--behavior", mem_behavior, "behavior file")->required();
  mem->add_option("--set", mem_set, "local, ns, q1 or aq");
  mem->add_option("--tol", mem_tol, "membership tolerance");
  mem->add_option("--json-out", mem_json, "also write the result as JSON");

  std::string vis_behavior, vis_set = "local", vis_json;
  auto* vis = app.add_subcommand("visibility", "largest white-noise visibility inside a set");
  vis->add_option("--behavior", vis_behavior, "behavior file")->required();
  vis->add_option("--set", vis_set, "local, ns, q1 or aq");
  vis->add_option("--json-out", vis_json, "also write the result as JSON");

  // batch
  auto* bat = app.add_subcommand("batch", "simulate and analyze many experiments");
  SourceOptions bat_src;
  PipelineOptions bat_pipe;
  int bat_experiments = 100;
  std::int64_t bat_trials = 1000000;
  unsigned bat_threads = 0;
  std::string bat_out, bat_records;
  bat_src.add_to(bat);
  bat_pipe.add_to(bat);
  bat->add_option("--experiments", bat_experiments, "number of simulated experiments");
  bat->add_option("--trials", bat_trials, "trials per experiment");
  bat->add_option("--threads", bat_threads, "worker threads (0: all cores)");
  bat->add_option("--out", bat_out, "summary JSON");
  bat->add_option("--records", bat_records, "per-experiment JSON lines");

  // splice config-file defaults in after the subcommand name
  std::vector<std::string> args(argv + 1, argv + argc);
  for (std::size_t i = 0; i + 1 < args.size(); ++i)
    if (args[i] == "--config") {
      config_path = args[i + 1];
      const auto extra = config_file_args(config_path);
      args.erase(args.begin() + i, args.begin() + i + 2);
      std::size_t at = 0;
      while (at < args.size() && !app.get_subcommand_ptr(args[at])) ++at;
      if (at == args.size()) throw pbr::ValidationError("--config given without a subcommand");
      args.insert(args.begin() + at + 1, extra.begin(), extra.end());
      break;
    }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::streamsize prec = std::numeric_limits<double>::max_digits10;
  if (*sim) {
    const auto spec = sim_src.spec();
    const auto dist = parse_input_distribution(sim_src.input_dist);
    const auto seq = pbr::simulate(spec, dist, sim_trials);
    const auto behavior = pbr::mixed_source(spec);
    if (sim_out.empty()) {
      pbr::io::write_trials(std::cout, seq);
      std::cerr << pbr::io::behavior_json(behavior).dump() << '\n';
    } else {
      auto out = pbr::io::open_output(sim_out);
      pbr::io::write_trials(out, seq);
      std::cout << pbr::io::behavior_json(behavior).dump() << '\n';
    }
    if (!sim_behavior_out.empty()) write_json_file(sim_behavior_out, pbr::io::behavior_json(behavior));
    return 0;
  }

  if (*ana) {
    const auto dist = parse_input_distribution(ana_input_dist);
    const auto cfgs = ana_pipe.configs(dist);
    const bool pair = !ana_train.empty() || !ana_test.empty();
    if (pair == !ana_trials.empty())
      throw pbr::ValidationError("give either --trials or both --counts-train and --counts-test");
    if (pair && (ana_train.empty() || ana_test.empty()))
      throw pbr::ValidationError("--counts-train and --counts-test must be given together");
    std::optional<pbr::TrialSequence> seq;
    pbr::CountsTable train, test;
    if (pair) {
      auto tr = pbr::io::open_input(ana_train);
      auto te = pbr::io::open_input(ana_test);
      train = pbr::io::read_counts(tr);
      test = pbr::io::read_counts(te);
    } else {
      auto in = pbr::io::open_input(ana_trials);
      seq = pbr::io::read_trials(in);
    }
    if (!ana_out_dir.empty()) std::filesystem::create_directories(ana_out_dir);
    const json audit = resolved_options(ana, config_path);
    for (const auto& cfg : cfgs) {
      const auto rep = pair ? pbr::analyze_counts_pair(train, test, cfg) : pbr::analyze_sequence(*seq, cfg);
      json j = pbr::io::report_json(rep);
      j["config"] = audit;
      if (ana_out_dir.empty()) {
        std::cout << j.dump() << '\n';
      } else {
        const auto path = (std::filesystem::path(ana_out_dir) / ("report_" + pbr::to_string(cfg.hypothesis) + ".json")).string();
        write_json_file(path, j);
        std::cout << pbr::to_string(cfg.hypothesis) << "\tlog10_t=" << std::setprecision(6) << rep.log10_t
                  << "\tp_bound=" << rep.p_bound << "\t" << path << '\n';
      }
    }
    return 0;
  }

  if (*mem) {
    auto in = pbr::io::open_input(mem_behavior);
    const auto b = pbr::io::read_behavior(in);
    const auto h = pbr::HypothesisSet::make(pbr::parse_set_kind(mem_set));
    const auto m = pbr::membership(b, h, mem_tol);
    std::cout << (m.inside ? "inside" : "outside") << "\tmargin=" << std::setprecision(prec) << m.margin << '\n';
    if (!mem_json.empty())
      write_json_file(mem_json, {{"set", mem_set}, {"inside", m.inside}, {"margin", pbr::io::number(m.margin)},
                                 {"config", resolved_options(mem, config_path)}});
    return 0;
  }

  if (*vis) {
    auto in = pbr::io::open_input(vis_behavior);
    const auto b = pbr::io::read_behavior(in);
    const auto h = pbr::HypothesisSet::make(pbr::parse_set_kind(vis_set));
    const double nu = pbr::visibility(b, h);
    std::cout << "visibility=" << std::setprecision(prec) << nu << '\n';
    if (!vis_json.empty())
      write_json_file(vis_json, {{"set", vis_set}, {"visibility", pbr::io::number(nu)}, {"config", resolved_options(vis, config_path)}});
    return 0;
  }

  if (*bat) {
    const auto spec = bat_src.spec();
    const auto dist = parse_input_distribution(bat_src.input_dist);
    const auto cfgs = bat_pipe.configs(dist);
    const auto summary = pbr::run_batch(spec, dist, bat_experiments, bat_trials, cfgs, bat_threads);
    std::cout << pbr::io::render_batch_table(summary);
    json j = pbr::io::batch_summary_json(summary);
    j["config"] = resolved_options(bat, config_path);
    if (!bat_out.empty()) write_json_file(bat_out, j);
    if (!bat_records.empty()) {
      auto out = pbr::io::open_output(bat_records);
      pbr::io::write_batch_records(out, summary);
    }
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const pbr::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const pbr::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

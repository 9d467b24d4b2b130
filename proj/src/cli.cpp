#include "nppc/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "nppc/cf.hpp"
#include "nppc/dataset.hpp"
#include "nppc/errors.hpp"
#include "nppc/fitting.hpp"
#include "nppc/format.hpp"
#include "nppc/manifest.hpp"
#include "nppc/metrics.hpp"
#include "nppc/reliability.hpp"

namespace nppc {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

enum class Kind { Int, Real, Text };

struct Param {
  std::string key;
  Kind kind;
  json fallback;
  std::string help;
};

json convert(const Param& p, const std::string& text) {
  switch (p.kind) {
    case Kind::Int: return parse_int(text);
    case Kind::Real: return parse_double(text);
    case Kind::Text: return text;
  }
  return text;
}

json check_type(const Param& p, const json& v) {
  const bool ok = (p.kind == Kind::Int && v.is_number_integer()) || (p.kind == Kind::Real && v.is_number()) ||
                  (p.kind == Kind::Text && v.is_string());
  if (!ok) throw UsageError("manifest param '" + p.key + "' has the wrong type");
  return p.kind == Kind::Real ? json(v.get<double>()) : v;
}

std::string flag_name(const std::string& key) {
  std::string out = "--" + key;
  for (char& c : out) {
    if (c == '_') c = '-';
  }
  return out;
}

const std::string kScaleDefault = "1:5:401";

std::map<std::string, std::vector<Param>> command_params() {
  const SynthSpec synth;
  const SamplingBudget budget;
  const CfConfig cf;
  const GridSpec grid;
  return {
      {"simulate",
       {{"xi", Kind::Text, "", "cognition vector n,g,w,o,s (required)"},
        {"decoders", Kind::Text, "all", "decoder list, e.g. all or mvd,wad,mld,mad(s,0.75)"},
        {"samples", Kind::Int, 100000, "decoded feedback samples per decoder"},
        {"bins", Kind::Int, 80, "histogram bins on the scale"},
        {"responses", Kind::Int, 5, "sampled population responses to export"},
        {"scale", Kind::Text, kScaleDefault, "rating scale lo:hi:grid_points"}}},
      {"reliability",
       {{"n", Kind::Int, 100, "population size"},
        {"w", Kind::Real, 1.0, "tuning width"},
        {"o", Kind::Real, 5.0, "baseline offset"},
        {"s_axis", Kind::Text, "1:5:17", "stimulus axis, min:max:count or a comma list"},
        {"g_axis", Kind::Text, "1,5,10,25,50,100", "gain axis, min:max:count or a comma list"},
        {"decoders", Kind::Text, "all", "decoder list"},
        {"trials", Kind::Int, 10000, "decoded estimates per surface cell"},
        {"scale", Kind::Text, kScaleDefault, "rating scale lo:hi:grid_points"}}},
      {"fit",
       {{"data", Kind::Text, "", "ratings CSV user,item,trial,rating (required)"},
        {"objective", Kind::Text, "jsd", "jsd or kappa"},
        {"grid_n", Kind::Text, grid.n.to_string(), "n range min:max:count"},
        {"grid_g", Kind::Text, grid.g.to_string(), "g range min:max:count"},
        {"grid_w", Kind::Text, grid.w.to_string(), "w range min:max:count"},
        {"grid_o", Kind::Text, grid.o.to_string(), "o range min:max:count"},
        {"grid_s", Kind::Text, grid.s.to_string(), "s range min:max:count"},
        {"decoders", Kind::Text, "all", "decoder list"},
        {"jsd_samples", Kind::Int, static_cast<std::int64_t>(budget.jsd_samples), "model samples per candidate (jsd)"},
        {"kappa_repeats", Kind::Int, budget.kappa_repeats, "5-draw rounds per candidate (kappa)"},
        {"sigma_floor", Kind::Real, budget.sigma_floor, "smallest Gaussian width in the JSD"},
        {"jsd_normalizer", Kind::Real, budget.jsd_normalizer, "divisor of the JSD"},
        {"refine", Kind::Int, 0, "coarse-to-fine rounds after the grid search"},
        {"scale", Kind::Text, kScaleDefault, "rating scale lo:hi:grid_points"}}},
      {"cf",
       {{"data", Kind::Text, "", "ratings CSV (required)"},
        {"fits", Kind::Text, "", "fits CSV from the fit command (needed by neural methods)"},
        {"methods", Kind::Text, "all", "all or a comma list of noiseless,noisy,xi,sub_n,sub_g,sub_w,sub_o,profiling"},
        {"k", Kind::Int, cf.k, "clusters"},
        {"holdout", Kind::Real, cf.holdout_frac, "share of users held out per cluster"},
        {"repeats", Kind::Int, cf.repeats, "random splits per trial"},
        {"bootstrap", Kind::Int, 1000, "bootstrap resamples for the barrier interval"},
        {"profile_grid", Kind::Int, cf.profile_grid_points, "stimulus candidates for noise profiling"},
        {"profile_samples", Kind::Int, static_cast<std::int64_t>(cf.profile_samples), "draws per profiling candidate"},
        {"elbow_max", Kind::Int, 8, "largest k in the elbow report"},
        {"scale", Kind::Text, kScaleDefault, "rating scale lo:hi:grid_points"}}},
      {"synth",
       {{"mode", Kind::Text, "stochastic", "stochastic, planted (latent groups) or planted-grid"},
        {"users", Kind::Int, synth.users, "users"},
        {"items", Kind::Int, synth.items, "items"},
        {"trials", Kind::Int, synth.trials, "rating trials per pair"},
        {"mix", Kind::Text, "0.35,0.5,0.15", "shares of pairs with 1, 2, 3+ distinct ratings"},
        {"variance_rate", Kind::Real, synth.variance_rate, "exponential rate of the per-pair variance"},
        {"plant_n", Kind::Text, "1:250:6", "planted-grid n range"},
        {"plant_g", Kind::Text, "1:100:6", "planted-grid g range"},
        {"plant_w", Kind::Text, "0.1:2:6", "planted-grid w range"},
        {"plant_o", Kind::Text, "1:15:6", "planted-grid o range"},
        {"plant_s", Kind::Text, "1:5:5", "planted-grid s range"},
        {"plant_decoders", Kind::Text, "all", "planted decoders"},
        {"scale", Kind::Text, kScaleDefault, "rating scale lo:hi:grid_points"}}},
  };
}

Scale parse_scale(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() != 3) throw UsageError("scale must be lo:hi:grid_points");
  Scale s{parse_double(parts[0]), parse_double(parts[1]), static_cast<int>(parse_int(parts[2]))};
  s.validate();
  return s;
}

CognitionVector parse_xi(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 5) throw UsageError("--xi needs five values n,g,w,o,s");
  return {static_cast<int>(parse_int(parts[0])), parse_double(parts[1]), parse_double(parts[2]),
          parse_double(parts[3]), parse_double(parts[4])};
}

std::vector<double> parse_axis(const std::string& text) {
  if (text.find(':') != std::string::npos) return Range::parse(text).values();
  std::vector<double> out;
  for (auto part : split(text, ',')) out.push_back(parse_double(part));
  if (out.empty()) throw UsageError("empty axis");
  return out;
}

struct Run {
  RunManifest manifest;
  fs::path out_dir;
  bool resume = false;

  const json& p(const std::string& key) const { return manifest.params.at(key); }
  std::string text(const std::string& key) const { return p(key).get<std::string>(); }
  std::int64_t integer(const std::string& key) const { return p(key).get<std::int64_t>(); }
  double real(const std::string& key) const { return p(key).get<double>(); }
  std::string comment() const { return "manifest_sha256=" + manifest.hash(); }

  fs::path path(const std::string& name) const { return out_dir / name; }

  void write(const std::string& name, const std::string& content) const {
    std::ofstream out(path(name), std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path(name).string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + path(name).string());
  }
};

template <class Fn>
std::string render(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

int positive(std::int64_t v, const std::string& what) {
  if (v < 1) throw UsageError(what + " must be >= 1");
  return static_cast<int>(v);
}

void cmd_simulate(const Run& run) {
  if (run.text("xi").empty()) throw UsageError("simulate needs --xi n,g,w,o,s");
  const Scale scale = parse_scale(run.text("scale"));
  const CognitionVector xi = parse_xi(run.text("xi"));
  try {
    xi.validate(scale);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("invalid --xi: ") + e.what());
  }
  const auto decoders = parse_decoder_list(run.text("decoders"));
  const auto samples = static_cast<std::size_t>(positive(run.integer("samples"), "samples"));
  const int bins = positive(run.integer("bins"), "bins");
  const int responses = static_cast<int>(run.integer("responses"));
  const std::uint64_t seed = run.manifest.seed;

  const auto stat = static_response(xi, scale);
  run.write("static_response.csv", render([&](std::ostream& os) {
              os << "# " << run.comment() << "\nneuron,preferred,rate\n";
              for (std::size_t j = 0; j < stat.rates.size(); ++j) {
                os << j + 1 << ',' << format_double(stat.preferred[j]) << ',' << format_double(stat.rates[j]) << '\n';
              }
            }));
  run.write("sampled_responses.csv", render([&](std::ostream& os) {
              os << "# " << run.comment() << "\ndraw,neuron,rate\n";
              for (int d = 0; d < responses; ++d) {
                const auto resp = sample_response(xi, scale, derive_seed(seed, Stream::Response, d));
                for (std::size_t j = 0; j < resp.rates.size(); ++j) {
                  os << d + 1 << ',' << j + 1 << ',' << format_double(resp.rates[j]) << '\n';
                }
              }
            }));
  const auto values = sample_feedback_multi(xi, decoders, scale, samples, seed, run.manifest.workers);
  std::ostringstream summary;
  summary << "# " << run.comment() << "\ndecoder,samples,mean,variance,boundary_mass\n";
  for (std::size_t d = 0; d < decoders.size(); ++d) {
    const Histogram h = make_histogram(values[d], scale, bins);
    run.write(histogram_file_name(xi, decoders[d], seed),
              render([&](std::ostream& os) { write_histogram_csv(h, os, run.comment()); }));
    const GaussianFit fit = gaussian_ml_fit(values[d]);
    summary << '"' << decoders[d].label() << "\"," << samples << ',' << format_double(fit.mu) << ','
            << format_double(fit.sigma * fit.sigma) << ',' << format_double(h.mass.front() + h.mass.back()) << '\n';
  }
  run.write("feedback_summary.csv", summary.str());
}

void cmd_reliability(const Run& run) {
  const Scale scale = parse_scale(run.text("scale"));
  CognitionVector base{static_cast<int>(run.integer("n")), 1.0, run.real("w"), run.real("o"), scale.midpoint()};
  std::vector<double> s_axis, g_axis;
  try {
    base.validate(scale);
    s_axis = parse_axis(run.text("s_axis"));
    g_axis = parse_axis(run.text("g_axis"));
    for (double s : s_axis) {
      if (!scale.contains(s)) throw UsageError("s axis leaves the scale");
    }
    for (double g : g_axis) {
      if (!(g > 0.0)) throw UsageError("g axis must be positive");
    }
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("axis misconfiguration: ") + e.what());
  }
  const auto decoders = parse_decoder_list(run.text("decoders"));
  const auto trials = static_cast<std::size_t>(positive(run.integer("trials"), "trials"));
  const auto surfaces = reliability_sweep(base, decoders, s_axis, g_axis, trials, scale, run.manifest.seed,
                                          run.manifest.workers);
  std::ostringstream columns;
  columns << "# " << run.comment() << "\ndecoder,g,column_mean\n";
  for (const auto& s : surfaces) {
    run.write(surface_file_name(s, run.manifest.seed),
              render([&](std::ostream& os) { write_surface_csv(s, os, run.comment()); }));
    const auto means = s.column_means();
    for (std::size_t j = 0; j < means.size(); ++j) {
      columns << '"' << s.decoder.label() << "\"," << format_double(g_axis[j]) << ',' << format_double(means[j]) << '\n';
    }
  }
  run.write("reliability_columns.csv", columns.str());
}

std::string format_eta(double seconds) {
  const auto s = static_cast<long>(seconds);
  return std::to_string(s / 3600) + "h" + std::to_string(s / 60 % 60) + "m" + std::to_string(s % 60) + "s";
}

void cmd_fit(const Run& run) {
  if (run.text("data").empty()) throw UsageError("fit needs --data");
  const RatingDataset data = ingest(run.text("data"));
  const Scale scale = parse_scale(run.text("scale"));
  GridSpec grid;
  grid.n = Range::parse(run.text("grid_n"));
  grid.g = Range::parse(run.text("grid_g"));
  grid.w = Range::parse(run.text("grid_w"));
  grid.o = Range::parse(run.text("grid_o"));
  grid.s = Range::parse(run.text("grid_s"));
  grid.decoders = parse_decoder_list(run.text("decoders"));
  grid.validate(scale);
  FitOptions options;
  options.objective = parse_objective(run.text("objective"));
  options.budget.jsd_samples = static_cast<std::size_t>(positive(run.integer("jsd_samples"), "jsd_samples"));
  options.budget.kappa_repeats = positive(run.integer("kappa_repeats"), "kappa_repeats");
  options.budget.sigma_floor = run.real("sigma_floor");
  options.budget.jsd_normalizer = run.real("jsd_normalizer");
  options.refine_rounds = static_cast<int>(run.integer("refine"));
  options.scale = scale;
  options.workers = run.manifest.workers;
  if (options.refine_rounds < 0) throw UsageError("refine must be >= 0");

  const std::string hash = run.manifest.hash();
  const fs::path ckpt = run.path("checkpoint.jsonl");
  DatasetFitHooks hooks;
  if (run.resume && fs::exists(ckpt)) {
    std::ifstream in(ckpt);
    std::string line;
    if (!std::getline(in, line) || json::parse(line).value("manifest_sha256", "") != hash) {
      throw UsageError("checkpoint was written by a different manifest; rerun without --resume");
    }
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        const FitResult r = fit_from_json(line);
        hooks.completed[{r.user, r.item}] = r;
      } catch (const json::exception&) {
        break;  // a partially written last line
      }
    }
    std::cerr << "resuming: " << hooks.completed.size() << " pairs already fitted\n";
  }
  // Rewrite the checkpoint with the recovered results so it never keeps a torn line.
  std::ofstream ck(ckpt, std::ios::trunc);
  ck << json{{"manifest_sha256", hash}}.dump() << '\n';
  for (const auto& [key, r] : hooks.completed) ck << fit_to_json(r) << '\n';
  ck.flush();

  std::cerr << "grid: " << grid.cardinality() << " vectors x " << grid.decoders.size() << " decoders\n";
  const auto start = std::chrono::steady_clock::now();
  auto last = start - std::chrono::seconds(10);
  hooks.table_progress = [&](std::size_t done, std::size_t total) {
    const auto now = std::chrono::steady_clock::now();
    if (done < total && now - last < std::chrono::seconds(2)) return;
    last = now;
    const double elapsed = std::chrono::duration<double>(now - start).count();
    const double eta = done > 0 ? elapsed * static_cast<double>(total - done) / static_cast<double>(done) : 0.0;
    std::cerr << "candidates " << done << "/" << total << "  elapsed " << format_eta(elapsed) << "  eta "
              << format_eta(eta) << '\n';
  };
  std::size_t fitted = 0;
  const std::size_t pairs = data.pairs().size();
  hooks.on_result = [&](const FitResult& r) {
    ck << fit_to_json(r) << '\n';
    ck.flush();
    if (++fitted % 25 == 0) std::cerr << "pairs fitted " << fitted << "/" << pairs << '\n';
  };
  hooks.warn = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  const auto fits = fit_dataset(data, grid, options, run.manifest.seed, hooks);
  run.write("fits.csv", render([&](std::ostream& os) { write_fits_csv(fits, os, run.comment()); }));
}

std::vector<FitResult> load_fits(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open fits file " + path);
  return read_fits_csv(in, path);
}

void cmd_cf(const Run& run) {
  if (run.text("data").empty()) throw UsageError("cf needs --data");
  const RatingDataset data = ingest(run.text("data"));
  std::vector<CfMethod> methods;
  if (run.text("methods") == "all") {
    methods = all_cf_methods();
  } else {
    for (auto part : split(run.text("methods"), ',')) methods.push_back(parse_cf_method(part));
  }
  std::optional<std::vector<FitResult>> fits;
  if (!run.text("fits").empty()) fits = load_fits(run.text("fits"));
  for (CfMethod m : methods) {
    if (needs_fits(m) && !fits) {
      throw UsageError("missing fits file: method " + std::string(to_string(m)) + " needs --fits");
    }
  }
  CfConfig config;
  config.k = positive(run.integer("k"), "k");
  config.holdout_frac = run.real("holdout");
  config.repeats = positive(run.integer("repeats"), "repeats");
  config.profile_grid_points = static_cast<int>(run.integer("profile_grid"));
  config.profile_samples = static_cast<std::size_t>(positive(run.integer("profile_samples"), "profile_samples"));
  config.scale = parse_scale(run.text("scale"));
  config.workers = run.manifest.workers;
  const int bootstrap = positive(run.integer("bootstrap"), "bootstrap");
  const WarnFn warn = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  const CfReport report =
      run_cf(data, fits ? &*fits : nullptr, methods, config, bootstrap, run.manifest.seed, warn);
  run.write("cf_scores.csv", render([&](std::ostream& os) { write_scores_csv(report, os, run.comment()); }));
  run.write("cf_summary.csv", render([&](std::ostream& os) { write_summary_csv(report, os, run.comment()); }));
  run.write("barrier.csv", render([&](std::ostream& os) { write_barrier_csv(report.barrier, os, run.comment()); }));

  // Elbow report on the per-user mean ratings of the non-target items.
  std::vector<std::vector<double>> points;
  const auto items = data.items();
  for (auto user : data.users()) {
    std::vector<double> x;
    for (std::size_t i = 0; i + 1 < items.size(); ++i) x.push_back(data.find(user, items[i])->mean());
    points.push_back(std::move(x));
  }
  const auto inertia =
      elbow_inertia(points, static_cast<int>(run.integer("elbow_max")), derive_seed(run.manifest.seed, Stream::KMeans));
  run.write("elbow.csv", render([&](std::ostream& os) {
              os << "# " << run.comment() << "\nk,inertia\n";
              for (std::size_t k = 0; k < inertia.size(); ++k) os << k + 1 << ',' << format_double(inertia[k]) << '\n';
            }));
}

void cmd_synth(const Run& run) {
  SynthSpec spec;
  spec.users = static_cast<int>(run.integer("users"));
  spec.items = static_cast<int>(run.integer("items"));
  spec.trials = static_cast<int>(run.integer("trials"));
  const auto mix = split(run.text("mix"), ',');
  if (mix.size() != 3) throw UsageError("--mix needs three shares");
  spec.mix = {parse_double(mix[0]), parse_double(mix[1]), parse_double(mix[2])};
  spec.variance_rate = run.real("variance_rate");
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const Scale scale = parse_scale(run.text("scale"));
  const std::string mode = run.text("mode");
  SynthResult result;
  if (mode == "stochastic") {
    result = synthesize_stochastic(spec, run.manifest.seed);
  } else if (mode == "planted") {
    result = synthesize_planted(spec, GroupPlanting::defaults(spec.items), scale, run.manifest.seed,
                                run.manifest.workers);
  } else if (mode == "planted-grid") {
    GridSpec g;
    g.n = Range::parse(run.text("plant_n"));
    g.g = Range::parse(run.text("plant_g"));
    g.w = Range::parse(run.text("plant_w"));
    g.o = Range::parse(run.text("plant_o"));
    g.s = Range::parse(run.text("plant_s"));
    g.decoders = parse_decoder_list(run.text("plant_decoders"));
    g.validate(scale);
    result = synthesize_planted(spec, GridPlanting{enumerate_grid(g), g.decoders}, scale, run.manifest.seed,
                                run.manifest.workers);
  } else {
    throw UsageError("--mode must be stochastic, planted or planted-grid");
  }
  run.write("dataset.csv", render([&](std::ostream& os) { export_csv(result.data, os, run.comment()); }));
  run.write("truth.jsonl", render([&](std::ostream& os) { write_truth_jsonl(result.truth, os); }));
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Noisy probabilistic population codes: simulation, fitting and CF evaluation", "nppc"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out_dir = ".";
  std::string manifest_path;
  bool resume = false;
  auto* seed_opt = app.add_option("--seed", seed, "run seed");
  auto* workers_opt = app.add_option("--workers", workers, "worker threads");
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_option("--manifest", manifest_path, "JSON manifest; its values override flags");

  const auto defs = command_params();
  std::map<std::string, CLI::App*> subs;
  std::map<std::string, std::map<std::string, std::pair<CLI::Option*, std::string>>> bound;
  const std::map<std::string, std::string> blurbs = {
      {"simulate", "static and sampled population responses and feedback histograms"},
      {"reliability", "MSE/MSE_max surfaces over stimulus and gain"},
      {"fit", "grid-search cognition vectors for every user-item pair"},
      {"cf", "collaborative-filtering comparison and magic barrier"},
      {"synth", "synthetic re-rating dataset with ground truth"}};
  for (const auto& [name, params] : defs) {
    CLI::App* sub = app.add_subcommand(name, blurbs.at(name));
    subs[name] = sub;
    for (const auto& p : params) {
      auto& slot = bound[name][p.key];
      slot.first = sub->add_option(flag_name(p.key), slot.second, p.help + " [" + (p.fallback.is_string() ? p.fallback.get<std::string>() : p.fallback.dump()) + "]");
    }
    if (name == "fit") sub->add_flag("--resume", resume, "continue from checkpoint.jsonl in the output directory");
  }

  CLI::App* active = nullptr;
  try {
    app.parse(argc, argv);
    std::string command;
    for (const auto& [name, sub] : subs) {
      if (sub->parsed()) {
        command = name;
        active = sub;
      }
    }
    Run run;
    run.manifest.command = command;
    run.manifest.seed = seed;
    run.manifest.workers = workers;
    run.out_dir = out_dir;
    run.resume = resume;
    const auto& params = defs.at(command);
    for (const auto& p : params) {
      const auto& slot = bound[command][p.key];
      run.manifest.params[p.key] = slot.first->count() > 0 ? convert(p, slot.second) : p.fallback;
    }
    if (!manifest_path.empty()) {
      std::ifstream in(manifest_path);
      if (!in) throw UsageError("cannot open manifest " + manifest_path);
      json file;
      try {
        file = json::parse(in);
      } catch (const json::exception& e) {
        throw UsageError(std::string("manifest is not valid JSON: ") + e.what());
      }
      if (file.contains("command") && file["command"] != command) {
        throw UsageError("manifest is for command '" + file["command"].get<std::string>() + "'");
      }
      if (file.contains("seed")) run.manifest.seed = file["seed"].get<std::uint64_t>();
      if (file.contains("workers")) run.manifest.workers = file["workers"].get<int>();
      if (file.contains("params")) {
        for (const auto& [key, value] : file["params"].items()) {
          const auto it = std::find_if(params.begin(), params.end(), [&](const Param& p) { return p.key == key; });
          if (it == params.end()) throw UsageError("unknown manifest param '" + key + "'");
          run.manifest.params[key] = check_type(*it, value);
        }
      }
    }
    (void)seed_opt;
    (void)workers_opt;
    if (run.manifest.workers < 1) throw UsageError("--workers must be >= 1");
    for (const char* key : {"data", "fits"}) {
      if (run.manifest.params.contains(key) && !run.text(key).empty()) {
        if (!fs::exists(run.text(key))) throw UsageError(std::string("--") + key + " file not found: " + run.text(key));
        run.manifest.inputs[key] = sha256_file(run.text(key));
      }
    }
    fs::create_directories(run.out_dir);
    if (command == "simulate") cmd_simulate(run);
    if (command == "reliability") cmd_reliability(run);
    if (command == "fit") cmd_fit(run);
    if (command == "cf") cmd_cf(run);
    if (command == "synth") cmd_synth(run);
    run.write("manifest.json", run.manifest.dump());
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    std::cerr << (active ? active->help() : app.help());
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const json::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
}

}  // namespace nppc

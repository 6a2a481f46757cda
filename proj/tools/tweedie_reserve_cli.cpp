// Command-line front end: fit, sample, select, reserve.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "tweedie_reserve/tweedie_reserve.hpp"

namespace fs = std::filesystem;
using namespace tweedie;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitMissing = 3;
constexpr int kExitNumerical = 4;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string triangle;
  std::string model = "M0";
  std::size_t iterations = 100000;
  std::size_t burn_in = 10000;
  std::uint64_t seed = 1;
  std::optional<double> p_fixed;
  std::string p_grid;
  std::string out;
  std::string chains_dir;
  std::string models = "M0,M1,M2,M3,M4,M5,M6";
  std::string dispersion = "MLE";
  bool pretune = false;
  bool predict = false;
  unsigned threads = 1;
  PriorDefaults prior;
  long max_evaluations = 100000;
  int starts = 3;
};

/// Applies one key=value setting from a config file.
void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  auto num = [&](auto& field) {
    std::istringstream in(value);
    in >> field;
    if (!in || !(in >> std::ws).eof()) throw InputError("config: bad value for " + key + ": " + value);
  };
  auto flag = [&](bool& field) {
    if (value == "true" || value == "1") field = true;
    else if (value == "false" || value == "0") field = false;
    else throw InputError("config: bad boolean for " + key + ": " + value);
  };
  if (key == "triangle") c.triangle = value;
  else if (key == "model") c.model = value;
  else if (key == "iterations") num(c.iterations);
  else if (key == "burn_in" || key == "burn-in") num(c.burn_in);
  else if (key == "seed") num(c.seed);
  else if (key == "p_fixed" || key == "p-fixed") { double p; num(p); c.p_fixed = p; }
  else if (key == "p_grid" || key == "p-grid") c.p_grid = value;
  else if (key == "out") c.out = value;
  else if (key == "chains_dir" || key == "chains-dir") c.chains_dir = value;
  else if (key == "models") c.models = value;
  else if (key == "dispersion") c.dispersion = value;
  else if (key == "pretune") flag(c.pretune);
  else if (key == "predict") flag(c.predict);
  else if (key == "threads") num(c.threads);
  else if (key == "p_lower") num(c.prior.p_lo);
  else if (key == "p_upper") num(c.prior.p_hi);
  else if (key == "phi_lower") num(c.prior.phi_lo);
  else if (key == "phi_upper") num(c.prior.phi_hi);
  else if (key == "alpha_lower") num(c.prior.alpha_lo);
  else if (key == "alpha_upper") num(c.prior.alpha_hi);
  else if (key == "beta_lower") num(c.prior.beta_lo);
  else if (key == "beta_upper") num(c.prior.beta_hi);
  else if (key == "max_evaluations") num(c.max_evaluations);
  else if (key == "starts") num(c.starts);
  else throw InputError("config: unknown key " + key);
}

void load_config(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("missing config file " + path);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto trimmed = std::string(detail::trim(line));
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) throw InputError("config: expected key=value, got: " + trimmed);
    apply_setting(c, std::string(detail::trim(std::string_view(trimmed).substr(0, eq))),
                  std::string(detail::trim(std::string_view(trimmed).substr(eq + 1))));
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto f : detail::split_fields(s))
    if (!f.empty()) out.emplace_back(f);
  return out;
}

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(':', start);
    double v;
    if (!detail::parse_double(detail::trim(std::string_view(s).substr(start, pos == std::string::npos ? pos : pos - start)), v))
      throw InputError("--p-grid expects a:b:step, got " + s);
    parts.push_back(v);
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) throw InputError("--p-grid expects a:b:step with a <= b, step > 0");
  std::vector<double> grid;
  for (long k = 0;; ++k) {
    const double p = std::round((parts[0] + static_cast<double>(k) * parts[2]) * 1e12) / 1e12;
    if (p > parts[1] + 1e-9) break;
    grid.push_back(p);
  }
  return grid;
}

Triangle read_triangle(const std::string& path) {
  if (path.empty()) throw InputError("--triangle is required");
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("missing triangle file " + path);
  return load_triangle(in);
}

fs::path output_dir(const RunConfig& c, const std::string& command) {
  fs::path dir;
  if (!c.out.empty()) {
    dir = c.out;
  } else {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%SZ", &tm);
    dir = command + "_" + buf;
  }
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

ModelSpec spec_for(const std::string& name, const Triangle& t) {
  try {
    return model_spec(name, t.I());
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
}

ChainOptions chain_options(const RunConfig& c) {
  if (!(c.iterations > c.burn_in)) throw InputError("iterations must exceed burn-in");
  ChainOptions o;
  o.iterations = c.iterations;
  o.burn_in = c.burn_in;
  o.seed = c.seed;
  o.pretune = c.pretune;
  o.p_fixed = c.p_fixed;
  return o;
}

/// Runs tasks 0..n-1 on up to `threads` workers; results land in task order.
template <class Task>
void parallel_for(std::size_t n, unsigned threads, Task&& task) {
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (workers <= 1) {
    for (std::size_t k = 0; k < n; ++k) task(k);
    return;
  }
  std::mutex m;
  std::size_t next = 0;
  std::exception_ptr error;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      while (true) {
        std::size_t k;
        {
          std::lock_guard lock(m);
          if (next >= n || error) return;
          k = next++;
        }
        try {
          task(k);
        } catch (...) {
          std::lock_guard lock(m);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

int cmd_fit(const RunConfig& c) {
  const auto t = read_triangle(c.triangle);
  const auto spec = spec_for(c.model, t);
  const auto box = PriorBox::for_model(spec, c.prior);
  const auto dir = output_dir(c, "fit");
  MleFit fit;
  std::optional<MsepReport> report;
  if (c.p_fixed && (*c.p_fixed == 1.0 || *c.p_fixed == 2.0)) {
    auto b = fit_boundary(t, *c.p_fixed, spec);
    fit = std::move(b.fit);
    report = b.report;
  } else {
    if (c.p_fixed) {
      fit = fit_at_fixed_p(t, spec, *c.p_fixed, box);
    } else {
      OptimizerSettings opts;
      opts.nelder_mead.max_evaluations = c.max_evaluations;
      opts.starts = c.starts;
      opts.seed = c.seed;
      fit = fit_mle(t, spec, box, opts);
    }
    if (c.dispersion == "PEARSON") report = reserve_mle(fit, DispersionSource::kPearson, pearson_dispersion(t, fit.params, spec));
    else if (c.dispersion == "MLE") report = reserve_mle(fit);
    else throw InputError("--dispersion must be MLE or PEARSON");
  }
  write_json(dir / "fit.json", fit_json(fit, report));
  for (const auto& w : fit.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << (dir / "fit.json").string() << '\n';
  if (!fit.converged) {
    std::cerr << "error: optimizer did not converge after " << fit.evaluations << " evaluations\n";
    return kExitNumerical;
  }
  if (!fit.covariance) {
    std::cerr << "error: observed information is singular; estimation error unavailable\n";
    return kExitNumerical;
  }
  return kExitOk;
}

std::string chain_stem(const fs::path& dir, const std::string& model, std::optional<double> p_fixed = std::nullopt) {
  std::string name = "chain_" + model;
  if (p_fixed) name += "_p" + format_17(*p_fixed);
  return (dir / name).string();
}

int cmd_sample(const RunConfig& c) {
  const auto t = read_triangle(c.triangle);
  const auto spec = spec_for(c.model, t);
  const auto box = PriorBox::for_model(spec, c.prior);
  const auto opts = chain_options(c);
  const auto dir = output_dir(c, "sample");
  const auto chain = run_chain(t, spec, box, opts);
  save_chain(chain_stem(dir, c.model, c.p_fixed), chain, spec);
  const auto summary = summarize(chain, std::min(kDefaultBlockLength, chain.retained() / 2));
  auto j = summary_json(summary, chain);
  j["pretuned"] = c.pretune;
  write_json(dir / ("summary_" + c.model + ".json"), j);
  for (const auto& w : chain.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << dir.string() << '\n';
  return kExitOk;
}

/// Chains for the requested models, loaded from --chains-dir or sampled.
std::vector<Chain> obtain_chains(const RunConfig& c, const Triangle& t, const std::vector<std::string>& models,
                                 const fs::path& dir) {
  std::vector<Chain> chains(models.size());
  if (!c.chains_dir.empty()) {
    for (std::size_t k = 0; k < models.size(); ++k)
      chains[k] = load_chain(chain_stem(c.chains_dir, models[k]), spec_for(models[k], t));
    return chains;
  }
  auto opts = chain_options(c);
  opts.p_fixed.reset();
  parallel_for(models.size(), c.threads, [&](std::size_t k) {
    const auto spec = spec_for(models[k], t);
    chains[k] = run_chain(t, spec, PriorBox::for_model(spec, c.prior), opts);
    save_chain(chain_stem(dir, models[k]), chains[k], spec);
  });
  return chains;
}

int cmd_select(const RunConfig& c) {
  const auto t = read_triangle(c.triangle);
  const auto models = split_list(c.models);
  if (models.empty()) throw InputError("--models is empty");
  for (const auto& m : models) spec_for(m, t);
  const auto dir = output_dir(c, "select");
  const auto chains = obtain_chains(c, t, models, dir);
  std::vector<const Chain*> ptrs;
  for (const auto& ch : chains) ptrs.push_back(&ch);
  ModelComparison cmp;
  cmp.models = models;
  cmp.posterior_probability = congdon_probabilities(ptrs);
  const auto full_spec = spec_for("M0", t);
  const auto full = fit_mle(t, full_spec, PriorBox::for_model(full_spec, c.prior));
  for (std::size_t k = 0; k < models.size(); ++k) {
    const auto spec = spec_for(models[k], t);
    const auto box = PriorBox::for_model(spec, c.prior);
    const auto d = dic(chains[k], t, spec, box);
    if (d.mean_outside_box) std::cerr << "warning: posterior mean of " << models[k] << " lies outside the prior box\n";
    cmp.dic.push_back(d.dic);
    const auto reduced = models[k] == "M0" ? full : fit_mle(t, spec, box);
    const auto l = lhr_pvalue(full, reduced);
    if (l.nesting_warning) std::cerr << "warning: " << models[k] << " fits better than M0; statistic clamped to 0\n";
    cmp.lhr_pvalue.push_back(l.p_value);
  }
  std::ofstream out(dir / "comparison.csv");
  write_comparison_csv(out, cmp);
  std::cout << (dir / "comparison.csv").string() << '\n';
  return kExitOk;
}

void write_histogram(const fs::path& path, std::span<const double> x) {
  std::ofstream out(path);
  write_histogram_csv(out, histogram_fd(x));
}

int cmd_reserve(const RunConfig& c) {
  const auto t = read_triangle(c.triangle);
  const auto spec = spec_for(c.model, t);
  const auto box = PriorBox::for_model(spec, c.prior);
  const auto opts = chain_options(c);
  const auto grid = c.p_grid.empty() ? std::vector<double>{} : parse_grid(c.p_grid);
  const auto dir = output_dir(c, "reserve");
  if (!c.p_grid.empty()) {
    std::vector<ConditionalPoint> points(grid.size());
    std::vector<std::vector<double>> draws(grid.size());
    parallel_for(grid.size(), c.threads, [&](std::size_t k) {
      auto pt = conditional_on_p(t, spec, box, {grid[k]}, opts, false).front();
      if (pt.error.empty()) {
        try {
          auto o = opts;
          o.p_fixed = grid[k];
          o.init = pt.mle_fit->params;
          o.scales = initial_scales(*pt.mle_fit);
          o.scales->sigma[0] = 1.0;
          const auto chain = run_chain(t, spec, box, o);
          draws[k] = reserve_draws(chain, spec);
          pt.bayesian = bayesian_decomposition(chain, spec, std::nullopt, std::min(kDefaultBlockLength, chain.retained() / 2));
        } catch (const std::exception& e) {
          pt.error = e.what();
        }
      }
      points[k] = std::move(pt);
    });
    Json reports = Json::array();
    bool failed = false;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      Json j;
      j["p"] = grid[k];
      j["bayesian"] = points[k].bayesian ? reserve_json(*points[k].bayesian) : Json(nullptr);
      j["mle"] = points[k].mle ? msep_json(*points[k].mle) : Json(nullptr);
      j["error"] = points[k].error.empty() ? Json(nullptr) : Json(points[k].error);
      if (!points[k].error.empty()) {
        failed = true;
        std::cerr << "error at p = " << grid[k] << ": " << points[k].error << '\n';
      }
      reports.push_back(j);
      if (!draws[k].empty()) write_histogram(dir / ("hist_r_tilde_p" + format_17(grid[k]) + ".csv"), draws[k]);
    }
    write_json(dir / "conditional.json", reports);
    std::cout << (dir / "conditional.json").string() << '\n';
    return failed ? kExitNumerical : kExitOk;
  }

  Chain chain;
  if (!c.chains_dir.empty()) {
    chain = load_chain(chain_stem(c.chains_dir, c.model, c.p_fixed), spec);
  } else {
    chain = run_chain(t, spec, box, opts);
    save_chain(chain_stem(dir, c.model, c.p_fixed), chain, spec);
  }
  const std::size_t block = std::min(kDefaultBlockLength, chain.retained() / 2);
  std::vector<double> predictive;
  if (c.predict) predictive = predictive_outstanding(chain, spec, Rng(c.seed).split(3));
  const auto report = c.predict ? bayesian_decomposition(chain, spec, std::span<const double>(predictive), block)
                                : bayesian_decomposition(chain, spec, std::nullopt, block);
  write_json(dir / "reserve.json", reserve_json(report));
  const auto rt = reserve_draws(chain, spec);
  write_histogram(dir / "hist_r_tilde.csv", rt);
  if (c.predict) write_histogram(dir / "hist_r.csv", predictive);
  if (!chain.p_fixed) {
    const auto bins = p_bin_decomposition(chain, spec);
    std::ofstream out(dir / "p_bins.csv");
    out << "bin_left,bin_right,count,er,pv,ee\n";
    for (const auto& b : bins.bins)
      out << format_17(b.left) << ',' << format_17(b.right) << ',' << b.count << ',' << format_17(b.er) << ','
          << format_17(b.pv) << ',' << format_17(b.ee) << '\n';
    write_histogram(dir / "hist_p.csv", chain.column(0));
  }
  std::cout << (dir / "reserve.json").string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  // Config file values become the defaults that command-line flags override.
  for (int k = 1; k + 1 < argc; ++k) {
    const std::string a = argv[k];
    if (a == "--config") {
      try {
        load_config(cfg, argv[k + 1]);
      } catch (const std::ios_base::failure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitMissing;
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
      }
    } else if (a.rfind("--config=", 0) == 0) {
      std::cerr << "error: use --config <path>\n";
      return kExitInput;
    }
  }

  CLI::App app{"Tweedie compound Poisson claims reserving"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "key=value configuration file (flags take precedence)");

  double p_fixed_value = cfg.p_fixed.value_or(0.0);
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value configuration file (flags take precedence)");
    sub->add_option("--triangle", cfg.triangle, "incremental triangle CSV");
    sub->add_option("--model", cfg.model, "model id M0..M6")->capture_default_str();
    sub->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
    sub->add_option("--out", cfg.out, "output directory (default: <command>_<timestamp>)");
    sub->add_option("--threads", cfg.threads, "maximum concurrent chains")->capture_default_str();
    sub->add_option("--p-lower", cfg.prior.p_lo)->capture_default_str();
    sub->add_option("--p-upper", cfg.prior.p_hi)->capture_default_str();
    sub->add_option("--phi-lower", cfg.prior.phi_lo)->capture_default_str();
    sub->add_option("--phi-upper", cfg.prior.phi_hi)->capture_default_str();
    sub->add_option("--alpha-lower", cfg.prior.alpha_lo)->capture_default_str();
    sub->add_option("--alpha-upper", cfg.prior.alpha_hi)->capture_default_str();
    sub->add_option("--beta-lower", cfg.prior.beta_lo)->capture_default_str();
    sub->add_option("--beta-upper", cfg.prior.beta_hi)->capture_default_str();
  };
  auto sampling = [&](CLI::App* sub) {
    sub->add_option("--iterations,-T", cfg.iterations, "chain length")->capture_default_str();
    sub->add_option("--burn-in", cfg.burn_in, "discarded initial sweeps")->capture_default_str();
    sub->add_flag("--pretune", cfg.pretune, "pretune proposal scales before sampling");
  };

  auto* fit = app.add_subcommand("fit", "maximum likelihood fit with MSEP report");
  common(fit);
  auto* fit_p = fit->add_option("--p-fixed", p_fixed_value, "fix p (1 and 2 give the boundary models)");
  fit->add_option("--dispersion", cfg.dispersion, "MLE or PEARSON")->capture_default_str();
  fit->add_option("--max-evaluations", cfg.max_evaluations)->capture_default_str();
  fit->add_option("--starts", cfg.starts, "optimizer starts (first plus jittered)")->capture_default_str();

  auto* sample = app.add_subcommand("sample", "MCMC chain and posterior summary");
  common(sample);
  sampling(sample);
  auto* sample_p = sample->add_option("--p-fixed", p_fixed_value, "freeze p at this value");

  auto* select = app.add_subcommand("select", "posterior model probabilities, DIC and LHR p-values");
  common(select);
  sampling(select);
  select->add_option("--models", cfg.models, "comma-separated model ids")->capture_default_str();
  select->add_option("--chains-dir", cfg.chains_dir, "directory with chain_<model>.csv/.json");

  auto* reserve = app.add_subcommand("reserve", "reserve decomposition, VaR and conditional-on-p reports");
  common(reserve);
  sampling(reserve);
  reserve->add_option("--chains-dir", cfg.chains_dir, "directory with chain_<model>.csv/.json");
  reserve->add_option("--p-grid", cfg.p_grid, "conditional grid a:b:step");
  reserve->add_flag("--predict", cfg.predict, "simulate outstanding payments and report their VaR");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInput;
  }
  if (fit_p->count() > 0 || sample_p->count() > 0) cfg.p_fixed = p_fixed_value;

  try {
    if (fit->parsed()) return cmd_fit(cfg);
    if (sample->parsed()) return cmd_sample(cfg);
    if (select->parsed()) return cmd_select(cfg);
    if (reserve->parsed()) return cmd_reserve(cfg);
  } catch (const TriangleParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitMissing;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitMissing;
  } catch (const ChainFormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ModelConsistencyError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitInput;
}

// JSON documents for fits, posterior summaries and reserve reports, and chain
// CSV import/export.
#pragma once

#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "tweedie_reserve/mcmc.hpp"
#include "tweedie_reserve/mle.hpp"
#include "tweedie_reserve/model_choice.hpp"
#include "tweedie_reserve/reserving.hpp"
#include "tweedie_reserve/triangle.hpp"

namespace tweedie {

using Json = nlohmann::ordered_json;

namespace detail {

inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json optional_number(const std::optional<double>& v) { return v ? number_or_null(*v) : Json(nullptr); }

inline Json number_array(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number_or_null(x));
  return a;
}

inline std::string quantile_key(double q) {
  std::ostringstream s;
  s << q;
  return s.str();
}

}  // namespace detail

inline Json msep_json(const MsepReport& r) {
  Json j;
  j["reserve"] = r.reserve;
  j["pv"] = r.process_variance;
  j["ee"] = detail::optional_number(r.estimation_error);
  j["msep"] = detail::optional_number(r.msep());
  j["dispersion_source"] = to_string(r.dispersion_source);
  j["dispersion"] = r.phi;
  return j;
}

/// Fit document; reserve fields are null when no report is given.
inline Json fit_json(const MleFit& fit, const std::optional<MsepReport>& report) {
  Json j;
  j["model"] = fit.spec.id();
  j["p"] = fit.params.p;
  j["phi"] = fit.params.phi;
  j["alpha"] = detail::number_array(fit.params.alpha);
  j["beta"] = detail::number_array(fit.params.beta);
  if (fit.covariance) {
    Json rows = Json::array();
    for (Eigen::Index a = 0; a < fit.covariance->rows(); ++a) {
      Json row = Json::array();
      for (Eigen::Index b = 0; b < fit.covariance->cols(); ++b) row.push_back(detail::number_or_null((*fit.covariance)(a, b)));
      rows.push_back(row);
    }
    j["covariance"] = rows;
  } else {
    j["covariance"] = nullptr;
  }
  j["covariance_coordinates"] = fit.layout.names;
  j["stdev"] = detail::number_array(fit.standard_deviations());
  j["log_likelihood"] = detail::number_or_null(fit.log_lik);
  if (report) {
    const auto m = msep_json(*report);
    for (auto it = m.begin(); it != m.end(); ++it) j[it.key()] = it.value();
  } else {
    for (const char* k : {"reserve", "pv", "ee", "msep", "dispersion_source"}) j[k] = nullptr;
  }
  j["p_fixed"] = detail::optional_number(fit.p_fixed);
  j["quasi_likelihood"] = fit.quasi_likelihood;
  j["converged"] = fit.converged;
  j["evaluations"] = fit.evaluations;
  j["hessian_asymmetry"] = fit.hessian_asymmetry;
  j["warnings"] = fit.warnings;
  return j;
}

inline Json summary_json(const PosteriorSummary& s, const Chain& chain) {
  Json j;
  j["model"] = s.spec_id;
  j["iterations"] = chain.size();
  j["burn_in"] = chain.burn_in;
  j["seed"] = chain.seed;
  j["p_fixed"] = detail::optional_number(chain.p_fixed);
  j["samples"] = s.samples;
  j["block_length"] = s.block_length;
  j["map_log_likelihood"] = s.map_log_lik;
  j["proposal_scales"] = detail::number_array(s.scales);
  Json coords = Json::array();
  for (const auto& c : s.coordinates) {
    Json e;
    e["name"] = c.name;
    e["mmse"] = c.mmse;
    e["map"] = c.map;
    e["stdev"] = c.sd;
    e["q05"] = c.q05;
    e["q95"] = c.q95;
    e["se"] = {{"mmse", detail::number_or_null(c.se_mmse)},
               {"stdev", detail::number_or_null(c.se_sd)},
               {"q05", detail::number_or_null(c.se_q05)},
               {"q95", detail::number_or_null(c.se_q95)},
               {"map", detail::number_or_null(c.se_map)}};
    e["acceptance_rate"] = detail::number_or_null(c.acceptance_rate);
    coords.push_back(e);
  }
  j["coordinates"] = coords;
  j["evaluation_failures"] = chain.evaluation_failures;
  j["warnings"] = chain.warnings;
  return j;
}

inline Json reserve_json(const ReserveReport& r) {
  Json j;
  j["mode"] = r.mode == ReserveReport::Mode::kModelAveraged ? "MODEL_AVERAGED" : "CONDITIONAL";
  j["p"] = detail::optional_number(r.p);
  j["er"] = r.er;
  j["pv"] = r.pv;
  j["ee"] = r.ee;
  j["msep"] = r.msep();
  Json var = Json::object(), var_se = Json::object();
  for (const auto& [q, v] : r.var) {
    const auto key = detail::quantile_key(q);
    var[key] = {{"r_tilde", v.r_tilde}, {"r", detail::optional_number(v.r)}};
    var_se[key] = {{"r_tilde", detail::number_or_null(v.r_tilde_se)}, {"r", detail::optional_number(v.r_se)}};
  }
  j["var"] = var;
  j["se"] = {{"er", detail::number_or_null(r.se_er)},
             {"pv", detail::number_or_null(r.se_pv)},
             {"ee", detail::number_or_null(r.se_ee)},
             {"msep", detail::number_or_null(r.se_msep)},
             {"var", var_se}};
  j["samples"] = r.samples;
  return j;
}

/// Metadata needed to reload a chain CSV.
inline Json chain_metadata_json(const Chain& chain) {
  Json j;
  j["model"] = chain.spec_id;
  j["iterations"] = chain.size();
  j["burn_in"] = chain.burn_in;
  j["seed"] = chain.seed;
  j["p_fixed"] = detail::optional_number(chain.p_fixed);
  j["proposal_scales"] = detail::number_array(chain.scales.sigma);
  j["accepted"] = chain.accepted;
  j["attempted"] = chain.attempted;
  j["evaluation_failures"] = chain.evaluation_failures;
  return j;
}

inline void write_chain_csv(std::ostream& out, const Chain& chain, const ModelSpec& spec) {
  write_chain_csv_header(out, spec.I());
  write_chain_csv_rows(out, chain, spec, 0, chain.size());
}

class ChainFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads a chain CSV written by write_chain_csv. Tied coordinates must agree
/// exactly, as they do in files produced from a chain of the same model.
inline Chain read_chain_csv(std::istream& in, const ModelSpec& spec, const Json& metadata) {
  std::string line;
  if (!std::getline(in, line)) throw ChainFormatError("chain file is empty");
  std::ostringstream expected;
  write_chain_csv_header(expected, spec.I());
  auto header = expected.str();
  header.pop_back();
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw ChainFormatError("chain header does not match model " + spec.id());
  Chain c;
  c.spec_id = spec.id();
  c.names = spec.coordinate_names();
  c.dim = static_cast<std::size_t>(spec.free_param_count());
  const int I = spec.I();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split_fields(line);
    if (fields.size() != static_cast<std::size_t>(2 * I + 5))
      throw ChainFormatError("chain row " + std::to_string(line_no) + " has the wrong number of fields");
    std::vector<double> v(fields.size());
    for (std::size_t k = 0; k < fields.size(); ++k)
      if (!detail::parse_double(detail::trim(fields[k]), v[k]))
        throw ChainFormatError("chain row " + std::to_string(line_no) + " has a non-numeric field");
    TweedieParams q;
    q.p = v[1];
    q.phi = v[2];
    q.alpha.assign(1, 1.0);
    for (int i = 1; i <= I; ++i) q.alpha.push_back(v[static_cast<std::size_t>(2 + i)]);
    for (int j = 0; j <= I; ++j) q.beta.push_back(v[static_cast<std::size_t>(3 + I + j)]);
    const auto x = spec.compress(q, 0.0);
    c.values.insert(c.values.end(), x.begin(), x.end());
    c.log_lik.push_back(v.back());
  }
  c.burn_in = metadata.value("burn_in", std::size_t{0});
  c.seed = metadata.value("seed", std::uint64_t{0});
  if (metadata.contains("p_fixed") && !metadata["p_fixed"].is_null()) c.p_fixed = metadata["p_fixed"].get<double>();
  if (metadata.contains("proposal_scales"))
    for (const auto& s : metadata["proposal_scales"]) c.scales.sigma.push_back(s.is_null() ? 0.0 : s.get<double>());
  c.accepted = metadata.value("accepted", std::vector<long>(c.dim, 0));
  c.attempted = metadata.value("attempted", std::vector<long>(c.dim, 0));
  c.evaluation_failures = metadata.value("evaluation_failures", 0L);
  if (c.burn_in >= c.size()) throw ChainFormatError("chain burn-in is not shorter than the chain");
  return c;
}

/// Writes <stem>.csv and <stem>.json.
inline void save_chain(const std::string& stem, const Chain& chain, const ModelSpec& spec) {
  std::ofstream csv(stem + ".csv");
  if (!csv) throw std::runtime_error("cannot write " + stem + ".csv");
  write_chain_csv(csv, chain, spec);
  std::ofstream meta(stem + ".json");
  if (!meta) throw std::runtime_error("cannot write " + stem + ".json");
  meta << chain_metadata_json(chain).dump(2) << '\n';
}

class MissingArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Chain load_chain(const std::string& stem, const ModelSpec& spec) {
  std::ifstream meta(stem + ".json");
  std::ifstream csv(stem + ".csv");
  if (!meta || !csv) throw MissingArtifactError("missing chain files " + stem + ".{csv,json}");
  const Json m = Json::parse(meta);
  if (m.value("model", std::string{}) != spec.id())
    throw ChainFormatError("chain " + stem + " was produced for a different model");
  return read_chain_csv(csv, spec, m);
}

}  // namespace tweedie

#pragma once

// Declarative scenarios: JSON config -> bundle, trace and operator -> JSON report.
// Complex numbers are [re, im] pairs everywhere; Z-values are arrays of them.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ncindex/chern.hpp"
#include "ncindex/cover.hpp"
#include "ncindex/spectral.hpp"

namespace ncindex {

using Json = nlohmann::ordered_json;

inline constexpr const char* kChernNormalization =
    "degree-2j part is tau(ev(Omega^j)) (i/2pi)^j / j!; a line bundle with charge c integrates to c";

struct Expectation {
  std::string quantity;
  Json value;
  double tol = 1e-6;
  std::string provenance;
};

struct RetractionSpec {
  int samples = 10;
  double delta = 0.05;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  SpecPtr algebra;
  TraceFunctional trace = TraceFunctional::normalized(AlgebraSpec::matrices({1}));
  std::string operator_kind = "dolbeault";
  int grid_n = 16;
  Bundle bundle;
  std::optional<int> cover_degree;
  std::optional<RetractionSpec> retraction;
  double relative_tol = kDefaultRelativeTol;
  double gap_ratio = kRequiredGapRatio;
  std::vector<Expectation> expectations;
};

namespace scenario_detail {

inline const std::vector<std::string>& known_quantities() {
  static const std::vector<std::string> q{
      "analytic_index",     "topological_index", "kernel_dim_t",   "cokernel_dim_t",
      "discrepancy",        "k0_index",          "chern_degree0",  "chern_degree2",
      "closedness_residual", "cover_index",      "base_index",     "l2_canonical",
      "l2_delocalized",     "twisted_canonical", "twisted_delocalized"};
  return q;
}

[[noreturn]] inline void bad(const std::string& path, const std::string& what) {
  throw ConfigError("field '" + path + "': " + what);
}

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
inline std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

inline const Json& need(const Json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) bad(path.empty() ? "<root>" : path, "expected an object");
  if (!obj.contains(key)) bad(join(path, key), "missing");
  return obj.at(key);
}

inline double number(const Json& v, const std::string& path) {
  if (!v.is_number()) bad(path, "expected a number");
  return v.get<double>();
}

inline int integer(const Json& v, const std::string& path) {
  if (!v.is_number_integer()) bad(path, "expected an integer");
  return v.get<int>();
}

inline std::string text(const Json& v, const std::string& path) {
  if (!v.is_string()) bad(path, "expected a string");
  return v.get<std::string>();
}

inline cplx complex(const Json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) bad(path, "expected [re, im]");
  return {v[0].get<double>(), v[1].get<double>()};
}

inline Mat matrix(const Json& v, const std::string& path, int size) {
  if (!v.is_array() || static_cast<int>(v.size()) != size) bad(path, "expected " + std::to_string(size) + " rows");
  Mat m(size, size);
  for (int i = 0; i < size; ++i) {
    const Json& row = v[i];
    if (!row.is_array() || static_cast<int>(row.size()) != size)
      bad(at(path, i), "expected " + std::to_string(size) + " entries");
    for (int j = 0; j < size; ++j) m(i, j) = complex(row[j], at(at(path, i), j));
  }
  return m;
}

/// One square matrix per block of A, of size rank * n_b.
inline ModuleMap block_map(const Json& v, const std::string& path, const SpecPtr& s, int rank) {
  if (!v.is_array() || static_cast<int>(v.size()) != s->num_blocks())
    bad(path, "expected one matrix per block (" + std::to_string(s->num_blocks()) + ")");
  ModuleMap m = ModuleMap::zero(s, rank, rank);
  for (int b = 0; b < s->num_blocks(); ++b) m.block(b) = matrix(v[b], at(path, b), rank * s->block_size(b));
  return m;
}

inline Json zjson(const ZValue& z) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < z.size(); ++i) a.push_back(Json::array({z(i).real(), z(i).imag()}));
  return a;
}

inline Json cjson(cplx z) { return Json::array({z.real(), z.imag()}); }

inline SpecPtr parse_algebra(const Json& j) {
  const std::string path = "algebra";
  if (!j.is_object()) bad(path, "expected an object");
  if (j.contains("blocks") == j.contains("group")) bad(path, "give exactly one of 'blocks' or 'group'");
  if (j.contains("blocks")) {
    const Json& b = j.at("blocks");
    if (!b.is_array() || b.empty()) bad(join(path, "blocks"), "expected a nonempty array of block sizes");
    std::vector<int> sizes;
    for (std::size_t i = 0; i < b.size(); ++i) {
      const int n = integer(b[i], at(join(path, "blocks"), i));
      if (n < 1) bad(at(join(path, "blocks"), i), "block sizes must be positive");
      sizes.push_back(n);
    }
    return AlgebraSpec::matrices(sizes);
  }
  try {
    return AlgebraSpec::group_algebra(FiniteGroup::parse(text(j.at("group"), join(path, "group"))));
  } catch (const DomainError& e) {
    bad(join(path, "group"), e.what());
  }
}

inline TraceFunctional parse_trace(const Json& j, const SpecPtr& s) {
  const std::string path = "trace";
  const std::string kind = text(need(j, "kind", path), join(path, "kind"));
  try {
    if (kind == "normalized") return TraceFunctional::normalized(s);
    if (kind == "center_valued") return TraceFunctional::center_valued(s);
    if (kind == "canonical") return TraceFunctional::canonical_group_trace(s);
    if (kind == "delocalized")
      return TraceFunctional::delocalized(s, integer(need(j, "element", path), join(path, "element")));
    if (kind == "scalar") {
      const Json& w = need(j, "weights", path);
      if (!w.is_array()) bad(join(path, "weights"), "expected an array");
      std::vector<double> ws;
      for (std::size_t i = 0; i < w.size(); ++i) ws.push_back(number(w[i], at(join(path, "weights"), i)));
      return TraceFunctional::scalar(s, ws);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    bad(path, e.what());
  }
  bad(join(path, "kind"), "unknown trace kind '" + kind + "'");
}

inline std::vector<MatrixForm> parse_omega(const Json& j, const Bundle& b, std::uint64_t seed) {
  const std::string path = "bundle.omega";
  const Json& r = need(j, "random", path);
  if (!r.is_object()) bad(join(path, "random"), "expected an object");
  const double scale = r.contains("scale") ? number(r.at("scale"), path + ".random.scale") : 0.3;
  const int modes = r.contains("modes") ? integer(r.at("modes"), path + ".random.modes") : 1;
  if (modes < 0) bad(path + ".random.modes", "must be nonnegative");
  std::mt19937_64 rng(seed);
  return random_tensorial_omega(b, rng, scale, modes);
}

inline Bundle parse_bundle(const Json& j, const SpecPtr& s, const Grid& g, std::uint64_t seed) {
  const std::string path = "bundle";
  if (!j.is_object()) bad(path, "expected an object");
  const std::string pres = j.contains("presentation") ? text(j.at("presentation"), join(path, "presentation")) : "automorphy";
  Bundle b;
  try {
    if (pres == "projection_field") {
      if (s->blocks() != std::vector<int>{1} || s->group()) bad(path, "projection-field models are defined over C");
      const std::string model = text(need(j, "model", path), join(path, "model"));
      if (model != "two_band") bad(join(path, "model"), "unknown model '" + model + "'");
      const double mass = j.contains("mass") ? number(j.at("mass"), join(path, "mass")) : 1.0;
      b = Bundle::projection_field(s, 2, {two_band_projection(g, mass)});
    } else if (pres == "automorphy") {
      const int rank = j.contains("rank") ? integer(j.at("rank"), join(path, "rank")) : 1;
      if (rank < 1) bad(join(path, "rank"), "must be positive");
      const ModuleMap id = ModuleMap::identity(s, rank);
      const ModuleMap p = j.contains("projection") ? block_map(j.at("projection"), join(path, "projection"), s, rank) : id;
      const ModuleMap c = j.contains("charge") ? block_map(j.at("charge"), join(path, "charge"), s, rank)
                                               : ModuleMap::zero(s, rank, rank);
      auto monodromy = [&](const std::string& key) {
        if (j.contains(key)) return block_map(j.at(key), join(path, key), s, rank);
        const std::string el = key + "_element";
        if (j.contains(el)) {
          if (!s->group()) bad(join(path, el), "group elements need a group algebra");
          const int h = integer(j.at(el), join(path, el));
          if (!s->group()->contains(h)) bad(join(path, el), "not an element of the group");
          return ModuleMap::diagonal(AlgebraElement::group_element(s, h), rank);
        }
        return id;
      };
      const ModuleMap u = monodromy("u"), v = monodromy("v");
      ProjectiveModule pm(p);
      b = Bundle::automorphy(pm, c, u, v, g);
      if (j.contains("chern")) {
        const double ch = number(j.at("chern"), join(path, "chern"));
        b = tensor_with_vector_bundle(Bundle::line(ch, g), b);
      }
    } else {
      bad(join(path, "presentation"), "unknown presentation '" + pres + "'");
    }
    if (j.contains("omega")) b = b.with_omega(parse_omega(j.at("omega"), b, seed));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    bad(path, e.what());
  }
  return b;
}

}  // namespace scenario_detail

/// Validates a parsed JSON config; every diagnostic names the offending field.
inline Scenario parse_scenario(const Json& j) {
  using namespace scenario_detail;
  if (!j.is_object()) bad("<root>", "expected an object");
  Scenario sc;
  sc.name = text(need(j, "name", ""), "name");
  const Json& seed = need(j, "seed", "");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0))
    bad("seed", "expected a nonnegative integer");
  sc.seed = seed.get<std::uint64_t>();
  sc.algebra = parse_algebra(need(j, "algebra", ""));
  sc.trace = parse_trace(need(j, "trace", ""), sc.algebra);
  if (j.contains("operator")) {
    sc.operator_kind = text(j.at("operator"), "operator");
    if (sc.operator_kind != "dolbeault")
      bad("operator", "only the Dolbeault operator on the flat torus is available, got '" + sc.operator_kind + "'");
  }
  const Json& grid = need(j, "grid", "");
  sc.grid_n = integer(need(grid, "n", "grid"), "grid.n");
  if (sc.grid_n < 8 || sc.grid_n > 64 || sc.grid_n % 2) bad("grid.n", "must be even and lie in [8, 64]");
  if (j.contains("tolerances")) {
    const Json& t = j.at("tolerances");
    if (!t.is_object()) bad("tolerances", "expected an object");
    if (t.contains("relative")) sc.relative_tol = number(t.at("relative"), "tolerances.relative");
    if (t.contains("gap_ratio")) sc.gap_ratio = number(t.at("gap_ratio"), "tolerances.gap_ratio");
    if (!(sc.relative_tol > 0)) bad("tolerances.relative", "must be positive");
    if (!(sc.gap_ratio > 0)) bad("tolerances.gap_ratio", "must be positive");
  }
  sc.bundle = parse_bundle(need(j, "bundle", ""), sc.algebra, Grid::torus(sc.grid_n), sc.seed);
  if (j.contains("cover")) {
    const Json& c = j.at("cover");
    const std::string g = text(need(c, "group", "cover"), "cover.group");
    const std::string axis = c.contains("axis") ? text(c.at("axis"), "cover.axis") : "x";
    if (axis != "x") bad("cover.axis", "only covers along x are implemented");
    if (g.rfind("Z/", 0) != 0) bad("cover.group", "expected a cyclic group Z/k");
    int k = 0;
    try {
      k = std::stoi(g.substr(2));
    } catch (const std::exception&) {
      bad("cover.group", "expected a cyclic group Z/k");
    }
    if (k < 2 || k > 6) bad("cover.group", "degree must lie in [2, 6]");
    if (sc.algebra->blocks() != std::vector<int>{1} || sc.algebra->group())
      bad("cover", "covers are formed for bundles over C");
    sc.cover_degree = k;
  }
  if (j.contains("retraction")) {
    const Json& r = j.at("retraction");
    RetractionSpec rs;
    if (r.contains("samples")) rs.samples = integer(r.at("samples"), "retraction.samples");
    if (r.contains("delta")) rs.delta = number(r.at("delta"), "retraction.delta");
    if (rs.samples < 1) bad("retraction.samples", "must be positive");
    if (!(rs.delta > 0 && rs.delta < 0.1)) bad("retraction.delta", "must lie in (0, 0.1)");
    if (sc.bundle.presentation() != Presentation::projection_field)
      bad("retraction", "retraction needs a projection-field bundle");
    sc.retraction = rs;
  }
  if (j.contains("expect")) {
    const Json& e = j.at("expect");
    if (!e.is_array()) bad("expect", "expected an array");
    for (std::size_t i = 0; i < e.size(); ++i) {
      const std::string p = at("expect", i);
      Expectation x;
      x.quantity = text(need(e[i], "quantity", p), join(p, "quantity"));
      const auto& q = known_quantities();
      if (std::find(q.begin(), q.end(), x.quantity) == q.end()) bad(join(p, "quantity"), "unknown quantity '" + x.quantity + "'");
      x.value = need(e[i], "value", p);
      if (!x.value.is_number() && !x.value.is_array()) bad(join(p, "value"), "expected a number or an array");
      if (e[i].contains("tol")) x.tol = number(e[i].at("tol"), join(p, "tol"));
      if (!(x.tol > 0)) bad(join(p, "tol"), "must be positive");
      x.provenance = text(need(e[i], "provenance", p), join(p, "provenance"));
      if (x.provenance.empty()) bad(join(p, "provenance"), "must not be empty");
      sc.expectations.push_back(std::move(x));
    }
  }
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario file '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
  return parse_scenario(j);
}

namespace scenario_detail {

/// Expected value as a list of complex numbers: a number, a list of numbers or
/// a list of [re, im] pairs.
inline std::vector<cplx> expected_values(const Json& v) {
  if (v.is_number()) return {v.get<double>()};
  std::vector<cplx> out;
  for (const Json& x : v) out.push_back(x.is_number() ? cplx(x.get<double>()) : complex(x, "value"));
  return out;
}

inline std::vector<cplx> actual_values(const Json& q) {
  if (q.is_number()) return {q.get<double>()};
  std::vector<cplx> out;
  for (const Json& x : q) out.push_back(x.is_number() ? cplx(x.get<double>()) : cplx(x[0].get<double>(), x[1].get<double>()));
  return out;
}

inline Json perturbation_retraction(const Bundle& b, const RetractionSpec& rs, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x5eedull);
  double worst_idem = 0.0, min_margin = std::numeric_limits<double>::infinity();
  int failures = 0;
  const MatrixForm& e = b.block(0).projection;
  for (int i = 0; i < rs.samples; ++i) {
    MatrixForm f = e;
    for (int p = 0; p < e.grid().points(); ++p) {
      const Mat x = linalg::random_gaussian(e.rows(), e.cols(), rng);
      f.at(0, p) += (0.999 * rs.delta / x.norm()) * x;
    }
    try {
      const MatrixForm q = retract_projection(f, rs.delta, &e);
      for (int p = 0; p < e.grid().points(); ++p) {
        const Mat& x = q.at(0, p);
        worst_idem = std::max(worst_idem, (x * x - x).norm());
      }
      min_margin = std::min(min_margin, image_isomorphism_margin(q, e));
    } catch (const RetractionError&) {
      ++failures;
    }
  }
  Json r;
  r["samples"] = rs.samples;
  r["delta"] = rs.delta;
  r["idempotency_residual"] = worst_idem;
  r["min_image_singular_value"] = std::isfinite(min_margin) ? Json(min_margin) : Json(nullptr);
  r["failures"] = failures;
  return r;
}

}  // namespace scenario_detail

/// Runs every pipeline of the scenario. The report is deterministic given the
/// config; status is "ok", "expectation_failure" or "gap_failure".
inline Json run_scenario(const Scenario& sc) {
  using namespace scenario_detail;
  Json rep;
  rep["name"] = sc.name;
  rep["seed"] = sc.seed;
  rep["algebra"] = sc.algebra->describe();
  rep["trace"] = sc.trace.describe();
  rep["operator"] = sc.operator_kind;
  rep["bundle"] = to_string(sc.bundle.presentation());
  rep["grid_n"] = sc.grid_n;
  std::map<std::string, Json> q;  // reported quantities for expectations

  const TwistedOperator op = assemble_dolbeault(sc.bundle);
  const SpectralTolerance st = spectral_tolerance(op, sc.relative_tol);
  Json tol;
  tol["relative"] = sc.relative_tol;
  tol["absolute"] = st.tol;
  tol["sigma_max"] = st.sigma_max;
  tol["gap_ratio"] = sc.gap_ratio;
  rep["tolerances"] = tol;

  bool gap_ok = true;
  try {
    const GnsKernel gk = gns_kernel(op, sc.relative_tol, sc.gap_ratio);
    const AnalyticIndex ai = analytic_index(gk, sc.trace);
    const ZValue top = topological_index(sc.bundle, sc.trace);
    rep["analytic_index"] = q["analytic_index"] = zjson(ai.index);
    rep["topological_index"] = q["topological_index"] = zjson(top);
    rep["kernel_dim_t"] = q["kernel_dim_t"] = zjson(ai.kernel_dim_t);
    rep["cokernel_dim_t"] = q["cokernel_dim_t"] = zjson(ai.cokernel_dim_t);
    rep["gap_ratio"] = std::isfinite(gk.gap_ratio) ? Json(gk.gap_ratio) : Json(nullptr);
    rep["discrepancy"] = q["discrepancy"] = (ai.index - top).norm();
    rep["rounding_residual"] = rounding_residual(ai.index);
    if (sc.trace.kind() != TraceKind::delocalized) {
      const FredholmData fd = module_index(op, sc.relative_tol, sc.gap_ratio);
      rep["k0_index"] = q["k0_index"] = fd.index.ranks;
    }
  } catch (const SpectralGapError& e) {
    gap_ok = false;
    rep["gap_ratio"] = e.measured_gap();
    rep["gap_failure"] = e.what();
    Json spec = Json::array();
    for (int b = 0; b < op.num_blocks(); ++b)
      for (int sign : {+1, -1}) {
        const RVec& ev = op.spectrum(b, sign).values;
        Json s;
        s["block"] = b;
        s["laplacian"] = sign > 0 ? "dbar^* dbar" : "dbar dbar^*";
        Json sig = Json::array();
        for (Eigen::Index i = 0; i < std::min<Eigen::Index>(ev.size(), 12); ++i) sig.push_back(std::sqrt(std::max(ev(i), 0.0)));
        s["smallest_singular_values"] = sig;
        spec.push_back(s);
      }
    rep["spectrum"] = spec;
  }

  const ChernForm ch = ch_linear(sc.bundle, sc.trace);
  Json cj;
  cj["normalization"] = kChernNormalization;
  cj["trace"] = ch.trace;
  cj["degree0_integral"] = q["chern_degree0"] = zjson(ch.integral0());
  cj["degree2_integral"] = q["chern_degree2"] = zjson(ch.integral2());
  cj["closedness_residual"] = q["closedness_residual"] = closedness_residual(ch);
  rep["chern"] = cj;

  if (sc.cover_degree) {
    Json cv;
    try {
      const CoverComparison cc = compare_cover(sc.bundle, *sc.cover_degree, sc.relative_tol);
      cv["group"] = "Z/" + std::to_string(*sc.cover_degree);
      cv["axis"] = "x";
      cv["base_index"] = cjson(cc.base_index);
      q["base_index"] = Json::array({cjson(cc.base_index)});
      cv["cover_index"] = q["cover_index"] = cc.cover_index;
      cv["l2_canonical"] = cjson(cc.l2_canonical);
      q["l2_canonical"] = Json::array({cjson(cc.l2_canonical)});
      Json d = Json::array(), td = Json::array();
      for (cplx z : cc.l2_delocalized) d.push_back(cjson(z));
      for (cplx z : cc.twisted_delocalized) td.push_back(cjson(z));
      cv["l2_delocalized"] = q["l2_delocalized"] = d;
      cv["twisted_canonical"] = cjson(cc.twisted_canonical);
      q["twisted_canonical"] = Json::array({cjson(cc.twisted_canonical)});
      cv["twisted_delocalized"] = q["twisted_delocalized"] = td;
      cv["deck_commutator"] = cc.deck_commutator;
      cv["dictionary_residual"] = cc.dictionary_residual;
      cv["min_gap_ratio"] = cc.min_gap_ratio;
    } catch (const SpectralGapError& e) {
      gap_ok = false;
      cv["gap_failure"] = e.what();
    }
    rep["cover"] = cv;
  }

  if (sc.retraction) rep["retraction"] = perturbation_retraction(sc.bundle, *sc.retraction, sc.seed);

  Json ex = Json::array();
  bool all_met = true;
  for (const Expectation& e : sc.expectations) {
    Json r;
    r["quantity"] = e.quantity;
    r["expected"] = e.value;
    r["tol"] = e.tol;
    r["provenance"] = e.provenance;
    const auto it = q.find(e.quantity);
    bool met = false;
    if (it == q.end()) {
      r["actual"] = nullptr;
      r["error"] = "quantity not available";
    } else {
      r["actual"] = it->second;
      const std::vector<cplx> want = expected_values(e.value), have = actual_values(it->second);
      if (want.size() != have.size()) {
        r["error"] = "expected " + std::to_string(want.size()) + " components, got " + std::to_string(have.size());
      } else {
        double worst = 0.0;
        for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(want[i] - have[i]));
        r["deviation"] = worst;
        met = worst <= e.tol;
      }
    }
    r["met"] = met;
    all_met = all_met && met;
    ex.push_back(r);
  }
  rep["expectations"] = ex;
  rep["status"] = !gap_ok ? "gap_failure" : (all_met ? "ok" : "expectation_failure");
  return rep;
}

inline void write_chern_csv(const Scenario& sc, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::string path = (std::filesystem::path(dir) / (sc.name + ".chern.csv")).string();
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  write_csv(ch_linear(sc.bundle, sc.trace), out);
}

}  // namespace ncindex

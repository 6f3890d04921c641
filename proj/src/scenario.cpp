#include "selmut/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include "selmut/errors.hpp"

namespace selmut {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Validation helpers. Every check records an issue and keeps going so the
// user sees all problems in one pass.
// ---------------------------------------------------------------------------
class Checker {
 public:
  explicit Checker(fs::path base_dir) : base_dir_(std::move(base_dir)) {}

  void fail(const std::string& where, const std::string& what) { issues_.push_back(where + ": " + what); }
  bool clean() const noexcept { return issues_.empty(); }
  std::vector<std::string> take() { return std::move(issues_); }
  const fs::path& base_dir() const noexcept { return base_dir_; }

  bool object(const Json& j, const std::string& where) {
    if (!j.is_object()) {
      fail(where, "expected an object");
      return false;
    }
    return true;
  }

  void allowed_keys(const Json& j, const std::string& where, std::initializer_list<std::string_view> keys) {
    for (const auto& [k, _] : j.items())
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) fail(where + "." + k, "unknown field");
  }

  std::optional<double> number(const Json& j, const std::string& where, const std::string& key, bool required) {
    if (!j.contains(key)) {
      if (required) fail(where + "." + key, "missing required number");
      return std::nullopt;
    }
    const auto& v = j.at(key);
    if (!v.is_number()) {
      fail(where + "." + key, "expected a number");
      return std::nullopt;
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
      fail(where + "." + key, "must be finite");
      return std::nullopt;
    }
    return x;
  }

  std::optional<std::string> string(const Json& j, const std::string& where, const std::string& key,
                                    bool required) {
    if (!j.contains(key)) {
      if (required) fail(where + "." + key, "missing required string");
      return std::nullopt;
    }
    if (!j.at(key).is_string()) {
      fail(where + "." + key, "expected a string");
      return std::nullopt;
    }
    return j.at(key).get<std::string>();
  }

  std::optional<std::vector<double>> numbers(const Json& v, const std::string& where) {
    if (!v.is_array()) {
      fail(where, "expected an array of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
        fail(where + "[" + std::to_string(i) + "]", "expected a finite number");
        return std::nullopt;
      }
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  /// Scalar (broadcast) or array of length n.
  std::optional<std::vector<double>> per_atom(const Json& j, const std::string& where, const std::string& key,
                                              std::size_t n) {
    if (!j.contains(key)) {
      fail(where + "." + key, "missing required per-atom values");
      return std::nullopt;
    }
    const auto& v = j.at(key);
    if (v.is_number()) return std::vector<double>(n, v.get<double>());
    auto out = numbers(v, where + "." + key);
    if (out && out->size() != n) {
      fail(where + "." + key, "has " + std::to_string(out->size()) + " entries, space has " + std::to_string(n) +
                                  " atoms");
      return std::nullopt;
    }
    return out;
  }

  std::optional<std::size_t> atom(const Json& v, const std::string& where, const StrategySpace* space) {
    if (!v.is_string()) {
      fail(where, "expected an atom id");
      return std::nullopt;
    }
    if (!space) return std::nullopt;
    if (auto i = space->find(v.get<std::string>())) return i;
    fail(where, "unknown atom id '" + v.get<std::string>() + "'");
    return std::nullopt;
  }

  std::optional<IndexSet> atoms(const Json& j, const std::string& where, const std::string& key,
                                const StrategySpace* space) {
    if (!j.contains(key)) {
      fail(where + "." + key, "missing required atom list");
      return std::nullopt;
    }
    const auto& v = j.at(key);
    if (!v.is_array() || v.empty()) {
      fail(where + "." + key, "expected a nonempty array of atom ids");
      return std::nullopt;
    }
    IndexSet out;
    bool ok = true;
    for (std::size_t i = 0; i < v.size(); ++i) {
      auto a = atom(v[i], where + "." + key + "[" + std::to_string(i) + "]", space);
      if (a)
        out.push_back(*a);
      else
        ok = false;
    }
    if (!ok) return std::nullopt;
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  fs::path resolve(const std::string& p) const {
    fs::path path(p);
    return path.is_absolute() ? path : base_dir_ / path;
  }

 private:
  fs::path base_dir_;
  std::vector<std::string> issues_;
};

std::optional<StrategySpace> parse_space(Checker& ck, const Json& doc) {
  if (!doc.contains("space")) {
    ck.fail("space", "missing");
    return std::nullopt;
  }
  const auto& j = doc.at("space");
  if (!ck.object(j, "space")) return std::nullopt;
  ck.allowed_keys(j, "space", {"atoms", "grid"});
  if (j.contains("atoms") == j.contains("grid")) {
    ck.fail("space", "give exactly one of 'atoms' or 'grid'");
    return std::nullopt;
  }
  try {
    if (j.contains("atoms")) {
      const auto& arr = j.at("atoms");
      if (!arr.is_array() || arr.empty()) {
        ck.fail("space.atoms", "expected a nonempty array");
        return std::nullopt;
      }
      std::vector<Atom> atoms;
      bool ok = true;
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string where = "space.atoms[" + std::to_string(i) + "]";
        if (!ck.object(arr[i], where)) {
          ok = false;
          continue;
        }
        ck.allowed_keys(arr[i], where, {"id", "coords"});
        auto id = ck.string(arr[i], where, "id", true);
        std::vector<double> coords{static_cast<double>(i)};
        if (arr[i].contains("coords")) {
          auto c = ck.numbers(arr[i].at("coords"), where + ".coords");
          if (c)
            coords = *c;
          else
            ok = false;
        }
        if (!id) ok = false;
        if (ok) atoms.push_back({*id, coords});
      }
      if (!ok) return std::nullopt;
      return StrategySpace(std::move(atoms));
    }
    const auto& g = j.at("grid");
    if (!ck.object(g, "space.grid")) return std::nullopt;
    ck.allowed_keys(g, "space.grid", {"lower", "upper", "resolution"});
    std::optional<std::vector<double>> lower, upper, res;
    for (auto [key, slot] : {std::pair{"lower", &lower}, {"upper", &upper}, {"resolution", &res}}) {
      if (!g.contains(key))
        ck.fail(std::string("space.grid.") + key, "missing");
      else
        *slot = ck.numbers(g.at(key), std::string("space.grid.") + key);
    }
    if (!lower || !upper || !res) return std::nullopt;
    std::vector<std::size_t> resolution;
    for (double r : *res) {
      if (!(r >= 1.0) || r != std::floor(r)) {
        ck.fail("space.grid.resolution", "entries must be positive integers");
        return std::nullopt;
      }
      resolution.push_back(static_cast<std::size_t>(r));
    }
    return StrategySpace::grid(*lower, *upper, resolution);
  } catch (const Error& e) {
    ck.fail("space", e.what());
    return std::nullopt;
  }
}

std::optional<RateModel> parse_model(Checker& ck, const Json& doc, const StrategySpace* space, double& varpi) {
  if (!doc.contains("model")) {
    ck.fail("model", "missing");
    return std::nullopt;
  }
  const auto& j = doc.at("model");
  if (!ck.object(j, "model")) return std::nullopt;
  auto family = ck.string(j, "model", "family", true);
  if (!family) return std::nullopt;
  if (auto v = ck.number(j, "model", "varpi", false)) {
    if (*v < 0.0) ck.fail("model.varpi", "must be >= 0");
    varpi = *v;
  }
  try {
    if (*family == "ricker") {
      ck.allowed_keys(j, "model", {"family", "varpi", "kappa", "eta", "theta"});
      auto theta = ck.number(j, "model", "theta", true);
      if (!space) return std::nullopt;
      auto kappa = ck.per_atom(j, "model", "kappa", space->size());
      auto eta = ck.per_atom(j, "model", "eta", space->size());
      if (!kappa || !eta || !theta) return std::nullopt;
      return RateModel::ricker(*kappa, *eta, *theta);
    }
    if (*family == "logistic") {
      ck.allowed_keys(j, "model", {"family", "varpi", "r", "d", "a"});
      if (!space) return std::nullopt;
      auto r = ck.per_atom(j, "model", "r", space->size());
      auto d = ck.per_atom(j, "model", "d", space->size());
      auto a = ck.per_atom(j, "model", "a", space->size());
      if (!r || !d || !a) return std::nullopt;
      return RateModel::logistic(*r, *d, *a);
    }
    if (*family == "tabulated") {
      ck.allowed_keys(j, "model", {"family", "varpi", "csv"});
      auto csv = ck.string(j, "model", "csv", true);
      if (!csv || !space) return std::nullopt;
      return RateModel::load_csv(ck.resolve(*csv), *space);
    }
    ck.fail("model.family", "unknown family '" + *family + "' (expected ricker, logistic or tabulated)");
  } catch (const Error& e) {
    ck.fail("model", e.what());
  }
  return std::nullopt;
}

std::optional<MutationKernel> parse_kernel(Checker& ck, const Json& j, const std::string& where,
                                           const StrategySpace* space, std::string& description) {
  if (!ck.object(j, where)) return std::nullopt;
  auto type = ck.string(j, where, "type", true);
  if (!type) return std::nullopt;
  const std::size_t n = space ? space->size() : 0;
  try {
    if (*type == "identity" || *type == "uniform") {
      ck.allowed_keys(j, where, {"type"});
      description = *type;
      if (!space) return std::nullopt;
      return *type == "identity" ? identity_kernel(n) : uniform_kernel(n);
    }
    if (*type == "gaussian") {
      ck.allowed_keys(j, where, {"type", "sigma"});
      auto sigma = ck.number(j, where, "sigma", true);
      if (sigma && !(*sigma > 0.0)) {
        ck.fail(where + ".sigma", "must be positive");
        return std::nullopt;
      }
      if (!sigma || !space) return std::nullopt;
      std::ostringstream os;
      os << "gaussian(sigma=" << *sigma << ")";
      description = os.str();
      return gaussian_grid_kernel(*space, *sigma);
    }
    if (*type == "directed") {
      ck.allowed_keys(j, where, {"type", "target", "optimal", "funnel"});
      auto funnel = ck.number(j, where, "funnel", true);
      std::optional<std::size_t> target;
      if (!j.contains("target"))
        ck.fail(where + ".target", "missing");
      else
        target = ck.atom(j.at("target"), where + ".target", space);
      auto optimal = ck.atoms(j, where, "optimal", space);
      if (funnel && !(*funnel > 0.0 && *funnel <= 1.0)) {
        ck.fail(where + ".funnel", "must lie in (0, 1]");
        return std::nullopt;
      }
      if (!funnel || !target || !optimal) return std::nullopt;
      if (std::find(optimal->begin(), optimal->end(), *target) == optimal->end()) {
        ck.fail(where + ".target", "must be a member of 'optimal'");
        return std::nullopt;
      }
      description = "directed(" + space->atom(*target).id + ")";
      return directed_kernel(n, *target, *optimal, *funnel);
    }
    if (*type == "explicit") {
      ck.allowed_keys(j, where, {"type", "rows"});
      if (!j.contains("rows") || !j.at("rows").is_array()) {
        ck.fail(where + ".rows", "expected an array of rows");
        return std::nullopt;
      }
      std::vector<std::vector<double>> rows;
      for (std::size_t i = 0; i < j.at("rows").size(); ++i) {
        auto r = ck.numbers(j.at("rows")[i], where + ".rows[" + std::to_string(i) + "]");
        if (!r) return std::nullopt;
        rows.push_back(*r);
      }
      if (space && rows.size() != n) {
        ck.fail(where + ".rows", "kernel is " + std::to_string(rows.size()) + "x?, space has " +
                                     std::to_string(n) + " atoms");
        return std::nullopt;
      }
      description = "explicit";
      return MutationKernel::from_rows(rows);
    }
    if (*type == "csv") {
      ck.allowed_keys(j, where, {"type", "path"});
      auto path = ck.string(j, where, "path", true);
      if (!path) return std::nullopt;
      auto k = load_kernel_csv(ck.resolve(*path));
      if (space && k.size() != n) {
        ck.fail(where, "kernel file is " + std::to_string(k.size()) + "x" + std::to_string(k.size()) +
                           ", space has " + std::to_string(n) + " atoms");
        return std::nullopt;
      }
      description = "csv(" + *path + ")";
      return k;
    }
    if (*type == "blend") {
      ck.allowed_keys(j, where, {"type", "base", "target", "eps"});
      auto eps = ck.number(j, where, "eps", true);
      if (eps && !(*eps >= 0.0 && *eps <= 1.0)) ck.fail(where + ".eps", "must lie in [0, 1]");
      std::string base_desc, target_desc;
      std::optional<MutationKernel> base, target;
      if (!j.contains("base"))
        ck.fail(where + ".base", "missing");
      else
        base = parse_kernel(ck, j.at("base"), where + ".base", space, base_desc);
      if (!j.contains("target"))
        ck.fail(where + ".target", "missing");
      else
        target = parse_kernel(ck, j.at("target"), where + ".target", space, target_desc);
      if (!eps || !base || !target || !(*eps >= 0.0 && *eps <= 1.0)) return std::nullopt;
      std::ostringstream os;
      os << "blend(" << base_desc << " -> " << target_desc << ", eps=" << *eps << ")";
      description = os.str();
      return blend_toward(*base, *target, *eps);
    }
    ck.fail(where + ".type", "unknown kernel type '" + *type + "'");
  } catch (const Error& e) {
    ck.fail(where, e.what());
  }
  return std::nullopt;
}

std::optional<AtomicMeasure> parse_initial(Checker& ck, const Json& doc, const StrategySpace* space,
                                           std::uint64_t seed) {
  if (!doc.contains("initial")) {
    ck.fail("initial", "missing");
    return std::nullopt;
  }
  const auto& j = doc.at("initial");
  if (!ck.object(j, "initial")) return std::nullopt;
  auto type = ck.string(j, "initial", "type", true);
  if (!type) return std::nullopt;
  auto total = ck.number(j, "initial", "total", false);
  if (total && !(*total >= 0.0)) {
    ck.fail("initial.total", "must be >= 0");
    return std::nullopt;
  }
  const std::size_t n = space ? space->size() : 0;
  std::vector<double> w;
  if (*type == "weights") {
    ck.allowed_keys(j, "initial", {"type", "weights", "total"});
    if (!space) return std::nullopt;
    auto v = ck.per_atom(j, "initial", "weights", n);
    if (!v) return std::nullopt;
    w = *v;
  } else if (*type == "uniform") {
    ck.allowed_keys(j, "initial", {"type", "total"});
    if (!space) return std::nullopt;
    w.assign(n, 1.0);
    if (!total) total = static_cast<double>(n);
  } else if (*type == "dirac") {
    ck.allowed_keys(j, "initial", {"type", "atom", "mass", "total"});
    auto m = ck.number(j, "initial", "mass", true);
    std::optional<std::size_t> a;
    if (!j.contains("atom"))
      ck.fail("initial.atom", "missing");
    else
      a = ck.atom(j.at("atom"), "initial.atom", space);
    if (!m || !a) return std::nullopt;
    w.assign(n, 0.0);
    w[*a] = *m;
  } else if (*type == "random") {
    ck.allowed_keys(j, "initial", {"type", "total"});
    if (!space) return std::nullopt;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    w.resize(n);
    for (double& x : w) x = unif(rng);
    if (!total) total = 1.0;
  } else {
    ck.fail("initial.type", "unknown type '" + *type + "' (expected weights, uniform, dirac or random)");
    return std::nullopt;
  }
  if (total) {
    double sum = 0.0;
    for (double x : w) sum += x;
    if (sum > 0.0)
      for (double& x : w) x *= *total / sum;
    else if (*total > 0.0) {
      ck.fail("initial.total", "cannot rescale a zero measure");
      return std::nullopt;
    }
  }
  try {
    return AtomicMeasure(std::move(w));
  } catch (const Error& e) {
    ck.fail("initial", e.what());
    return std::nullopt;
  }
}

IntegratorConfig parse_integrator(Checker& ck, const Json& doc) {
  IntegratorConfig cfg;
  if (!doc.contains("integrator")) return cfg;
  const auto& j = doc.at("integrator");
  if (!ck.object(j, "integrator")) return cfg;
  ck.allowed_keys(j, "integrator",
                  {"rel_tol", "abs_tol", "dt_init", "dt_min", "t_end", "dt_out", "clamp_floor", "max_steps"});
  auto set = [&](const char* key, double& slot) {
    if (auto v = ck.number(j, "integrator", key, false)) slot = *v;
  };
  set("rel_tol", cfg.rel_tol);
  set("abs_tol", cfg.abs_tol);
  set("dt_init", cfg.dt_init);
  set("dt_min", cfg.dt_min);
  set("t_end", cfg.t_end);
  set("dt_out", cfg.dt_out);
  set("clamp_floor", cfg.clamp_floor);
  if (auto v = ck.number(j, "integrator", "max_steps", false)) {
    if (*v >= 1.0)
      cfg.max_steps = static_cast<std::size_t>(*v);
    else
      ck.fail("integrator.max_steps", "must be >= 1");
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    ck.fail("integrator", e.what());
  }
  return cfg;
}

std::optional<std::vector<double>> optional_state(Checker& ck, const Json& j, const std::string& where,
                                                  const StrategySpace* space) {
  if (!j.contains("x_init")) return std::nullopt;
  if (!space) return std::nullopt;
  auto v = ck.per_atom(j, where, "x_init", space->size());
  if (v)
    for (double x : *v)
      if (x < 0.0) {
        ck.fail(where + ".x_init", "must be nonnegative");
        return std::nullopt;
      }
  return v;
}

std::vector<AnalysisRequest> parse_analyses(Checker& ck, const Json& doc, const StrategySpace* space,
                                            const std::optional<MutationKernel>& kernel) {
  std::vector<AnalysisRequest> out;
  if (!doc.contains("analyses")) return out;
  const auto& arr = doc.at("analyses");
  if (!arr.is_array()) {
    ck.fail("analyses", "expected an array");
    return out;
  }
  std::set<std::string> singletons;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string where = "analyses[" + std::to_string(i) + "]";
    const auto& j = arr[i];
    if (!ck.object(j, where)) continue;
    auto kind = ck.string(j, where, "kind", true);
    if (!kind) continue;
    const bool repeatable = *kind == "persistence" || *kind == "lyapunov" || *kind == "ratio";
    if (!repeatable && !singletons.insert(*kind).second) {
      ck.fail(where, "analysis '" + *kind + "' requested more than once");
      continue;
    }
    if (*kind == "permanence") {
      ck.allowed_keys(j, where, {"kind"});
      out.emplace_back(request::Permanence{});
    } else if (*kind == "persistence") {
      ck.allowed_keys(j, where, {"kind", "E", "eps"});
      auto E = ck.atoms(j, where, "E", space);
      auto eps = ck.number(j, where, "eps", true);
      if (eps && !(*eps > 0.0)) ck.fail(where + ".eps", "must be positive");
      if (E && eps && *eps > 0.0) out.emplace_back(request::Persistence{*E, *eps});
    } else if (*kind == "lyapunov") {
      ck.allowed_keys(j, where, {"kind", "function", "target", "c"});
      auto fn = ck.string(j, where, "function", true);
      request::Lyapunov req{LyapunovKind::V, std::nullopt, std::nullopt};
      bool ok = fn.has_value();
      if (fn && *fn == "volterra")
        req.kind = LyapunovKind::Volterra;
      else if (fn && *fn != "V") {
        ck.fail(where + ".function", "expected 'V' or 'volterra'");
        ok = false;
      }
      if (j.contains("target")) {
        req.target = ck.atom(j.at("target"), where + ".target", space);
        ok = ok && req.target.has_value();
      }
      if (auto c = ck.number(j, where, "c", false)) {
        if (!(*c > 0.0)) {
          ck.fail(where + ".c", "must be positive");
          ok = false;
        }
        req.c = c;
      }
      if (ok) out.emplace_back(req);
    } else if (*kind == "ass") {
      ck.allowed_keys(j, where, {"kind", "tol"});
      request::Ass req;
      if (auto t = ck.number(j, where, "tol", false)) req.tol = *t;
      out.emplace_back(req);
    } else if (*kind == "ratio") {
      ck.allowed_keys(j, where, {"kind", "U", "V", "xi"});
      auto U = ck.atoms(j, where, "U", space);
      auto V = ck.atoms(j, where, "V", space);
      auto xi = ck.number(j, where, "xi", true);
      if (xi && !(*xi > 0.0)) ck.fail(where + ".xi", "must be positive");
      if (U && V && xi && *xi > 0.0) out.emplace_back(request::Ratio{*U, *V, *xi});
    } else if (*kind == "equilibrium") {
      ck.allowed_keys(j, where, {"kind", "newton_tol", "x_init"});
      request::Equilibrium req;
      if (auto t = ck.number(j, where, "newton_tol", false)) req.newton_tol = *t;
      req.x_init = optional_state(ck, j, where, space);
      out.emplace_back(req);
    } else if (*kind == "continuation") {
      ck.allowed_keys(j, where, {"kind", "eps", "base", "target", "newton_tol", "x_init"});
      std::optional<std::vector<double>> eps;
      if (!j.contains("eps"))
        ck.fail(where + ".eps", "missing");
      else
        eps = ck.numbers(j.at("eps"), where + ".eps");
      if (eps) {
        if (eps->empty()) ck.fail(where + ".eps", "must be nonempty");
        for (std::size_t e = 0; e < eps->size(); ++e) {
          if (!((*eps)[e] >= 0.0 && (*eps)[e] <= 1.0)) ck.fail(where + ".eps", "values must lie in [0, 1]");
          if (e > 0 && !((*eps)[e] < (*eps)[e - 1])) ck.fail(where + ".eps", "must be strictly decreasing");
        }
      }
      std::string desc;
      std::optional<MutationKernel> base, target;
      if (j.contains("base"))
        base = parse_kernel(ck, j.at("base"), where + ".base", space, desc);
      else if (space)
        base = identity_kernel(space->size());
      if (j.contains("target"))
        target = parse_kernel(ck, j.at("target"), where + ".target", space, desc);
      else if (space)
        target = uniform_kernel(space->size());
      request::Continuation req{eps.value_or(std::vector<double>{}), identity_kernel(1), identity_kernel(1),
                                1e-10, std::nullopt};
      if (auto t = ck.number(j, where, "newton_tol", false)) req.newton_tol = *t;
      req.x_init = optional_state(ck, j, where, space);
      if (eps && base && target) {
        req.base = *base;
        req.target = *target;
        out.emplace_back(std::move(req));
      }
    } else if (*kind == "integral_representation") {
      ck.allowed_keys(j, where, {"kind"});
      if (kernel && !kernel->is_identity())
        ck.fail(where, "precondition violated: the integral representation check requires the identity kernel "
                       "(pure selection)");
      out.emplace_back(request::IntegralRepresentation{});
    } else if (*kind == "ess") {
      ck.allowed_keys(j, where, {"kind", "tol"});
      request::Ess req;
      if (auto t = ck.number(j, where, "tol", false)) req.tol = *t;
      out.emplace_back(req);
    } else if (*kind == "superiority") {
      ck.allowed_keys(j, where, {"kind", "grid"});
      request::Superiority req;
      if (auto g = ck.number(j, where, "grid", false)) {
        if (*g < 2.0 || *g != std::floor(*g))
          ck.fail(where + ".grid", "must be an integer >= 2");
        else
          req.grid = static_cast<std::size_t>(*g);
      }
      out.emplace_back(req);
    } else {
      ck.fail(where + ".kind", "unknown analysis '" + *kind + "'");
    }
  }
  return out;
}

double l1_to_dirac(const AtomicMeasure& x, std::size_t q, double K) {
  double acc = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) acc += std::abs(x[j] - (j == q ? K : 0.0));
  return acc;
}

double tail_max(const Trajectory& traj) {
  const double cut = 0.8 * traj.times.back();
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < traj.size(); ++i)
    if (traj.times[i] >= cut) m = std::max(m, traj.totals[i]);
  return m;
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << std::setw(2) << j << '\n';
}

}  // namespace

Scenario parse_scenario(const Json& doc, const fs::path& base_dir, std::uint64_t seed) {
  Checker ck(base_dir);
  if (!doc.is_object()) throw ValidationError({"document: expected a JSON object"});
  ck.allowed_keys(doc, "document",
                  {"schema", "name", "description", "space", "model", "kernel", "initial", "integrator", "analyses"});
  if (!doc.contains("schema"))
    ck.fail("schema", "missing (expected " + std::to_string(kScenarioSchema) + ")");
  else if (!doc.at("schema").is_number_integer() || doc.at("schema").get<int>() != kScenarioSchema)
    ck.fail("schema", "unsupported version (expected " + std::to_string(kScenarioSchema) + ")");
  std::string name = "scenario";
  if (auto n = ck.string(doc, "document", "name", false)) name = *n;
  (void)ck.string(doc, "document", "description", false);

  auto space = parse_space(ck, doc);
  const StrategySpace* sp = space ? &*space : nullptr;
  double varpi = 0.0;
  auto model = parse_model(ck, doc, sp, varpi);
  std::string kernel_desc;
  std::optional<MutationKernel> kernel;
  if (!doc.contains("kernel"))
    ck.fail("kernel", "missing");
  else
    kernel = parse_kernel(ck, doc.at("kernel"), "kernel", sp, kernel_desc);
  auto initial = parse_initial(ck, doc, sp, seed);
  auto integrator = parse_integrator(ck, doc);
  auto analyses = parse_analyses(ck, doc, sp, kernel);

  if (!ck.clean() || !space || !model || !kernel || !initial) {
    auto issues = ck.take();
    if (issues.empty()) issues.push_back("document: incomplete scenario");
    throw ValidationError(std::move(issues));
  }
  return Scenario{std::move(name), std::move(*space), std::move(*model), std::move(*kernel),
                  std::move(kernel_desc), std::move(*initial), integrator, varpi, std::move(analyses)};
}

Json read_scenario_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError({"cannot open scenario file '" + path.string() + "'"});
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError({"'" + path.string() + "' is not valid JSON: " + e.what()});
  }
}

Scenario load_scenario(const fs::path& path, std::uint64_t seed) {
  return parse_scenario(read_scenario_json(path), path.parent_path(), seed);
}

RunOutcome run_scenario(const Scenario& sc, Command command, const fs::path& out_dir) {
  RunOutcome out;
  fs::create_directories(out_dir);
  const auto& space = sc.space;
  const std::size_t n = space.size();
  const auto fam = TestFunctionFamily::bumps(space);

  Json& report = out.report;
  report["schema"] = kScenarioSchema;
  report["command"] = command == Command::Simulate ? "simulate" : command == Command::Analyze ? "analyze" : "equilibrium";
  report["scenario"] = sc.name;
  report["space"] = {{"atoms", ids_json(space, complement({}, n))}, {"min_distance", space.min_distance()}};
  if (!std::isfinite(space.min_distance())) report["space"]["min_distance"] = nullptr;
  report["model"] = {{"family", std::string(sc.model.family_name())}};
  report["kernel"] = {{"description", sc.kernel_description}, {"identity", sc.kernel.is_identity()}};
  report["test_functions"] = report_json(fam);
  report["integrator"] = {{"rel_tol", sc.integrator.rel_tol}, {"abs_tol", sc.integrator.abs_tol},
                          {"t_end", sc.integrator.t_end},     {"dt_out", sc.integrator.dt_out},
                          {"dt_init", sc.integrator.dt_init}, {"dt_min", sc.integrator.dt_min},
                          {"clamp_floor", sc.integrator.clamp_floor}};
  Json summary = Json::object();

  auto add_file = [&](const fs::path& p) {
    out.files.push_back(p);
    report["files"].push_back(p.filename().string());
  };
  report["files"] = Json::array();

  try {
    const auto profile = build_profile(sc.model, space);
    report["profile"] = report_json(space, profile);
    report["model"]["assumptions"] =
        report_json(space, check_assumptions(sc.model, 2.0 * profile.Kd + 1.0, 100, sc.varpi));
    report["kernel"]["optimum_preserving"] = report_json(space, is_optimum_preserving(sc.kernel, profile.Qd));

    std::vector<const AnalysisRequest*> todo;
    for (const auto& r : sc.analyses) {
      const bool eq_kind = std::holds_alternative<request::Equilibrium>(r) ||
                           std::holds_alternative<request::Continuation>(r);
      if (command == Command::Analyze || (command == Command::Equilibrium && eq_kind)) todo.push_back(&r);
    }
    const request::Equilibrium default_eq{};
    AnalysisRequest default_req = default_eq;
    if (command == Command::Equilibrium && todo.empty()) todo.push_back(&default_req);

    bool need_traj = command != Command::Equilibrium;
    for (const auto* r : todo)
      if (const auto* eq = std::get_if<request::Equilibrium>(r); eq && !eq->x_init) need_traj = true;

    std::optional<Trajectory> traj;
    if (need_traj) {
      try {
        traj = integrate(sc.initial, sc.kernel, sc.model, sc.integrator);
      } catch (const StiffnessError& e) {
        const auto path = out_dir / "trajectory.csv";
        write_trajectory_csv(e.partial(), space, path);
        add_file(path);
        report["trajectory"] = report_json(space, e.partial());
        throw;
      }
      const auto path = out_dir / "trajectory.csv";
      write_trajectory_csv(*traj, space, path);
      add_file(path);
      report["trajectory"] = report_json(space, *traj);
      summary["final_total"] = traj->totals.back();
      summary["tail_max_total"] = tail_max(*traj);
    }

    std::size_t lyap_count = 0, ratio_count = 0;
    for (const auto* r : todo) {
      std::visit(
          [&](const auto& req) {
            using T = std::decay_t<decltype(req)>;
            if constexpr (std::is_same_v<T, request::Permanence>) {
              const auto rep = permanence_check(*traj, profile);
              report["permanence"] = report_json(space, rep);
              const auto path = out_dir / "permanence.csv";
              write_series_csv(path, {"t", "total", "lower", "upper"},
                               {traj->times, traj->totals, rep.lower_env, rep.upper_env});
              add_file(path);
            } else if constexpr (std::is_same_v<T, request::Persistence>) {
              report["persistence"].push_back(
                  report_json(space, persistence_certificate(sc.model, sc.kernel, req.E, req.eps)));
            } else if constexpr (std::is_same_v<T, request::Lyapunov>) {
              VolterraParams params;
              Json extra = Json::object();
              if (req.kind == LyapunovKind::Volterra) {
                params.target = req.target.value_or(profile.fittest());
                params.optimal = profile.Qd;
                params.c = req.c ? *req.c : choose_c(sc.model, profile, params.target);
                extra = {{"target", space.atom(params.target).id}, {"c", params.c}};
              }
              const auto series = lyapunov_series(*traj, profile, req.kind, params);
              Json j = report_json(space, series);
              j.update(extra);
              const auto path =
                  out_dir / ("lyapunov_" + std::string(req.kind == LyapunovKind::V ? "V" : "volterra") + "_" +
                             std::to_string(lyap_count++) + ".csv");
              write_series_csv(path, {"t", "value"}, {traj->times, series.values});
              add_file(path);
              j["file"] = path.filename().string();
              report["lyapunov"].push_back(std::move(j));
            } else if constexpr (std::is_same_v<T, request::Ass>) {
              const auto v = ass_verdict(*traj, profile, fam, req.tol);
              report["ass"] = report_json(space, v);
              report["ass"]["tol"] = req.tol;
              summary["ass_converged"] = v.converged;
            } else if constexpr (std::is_same_v<T, request::Ratio>) {
              const auto diag = ratio_diagnostic(*traj, req.U, req.V, req.xi);
              Json j = report_json(space, diag);
              j["U"] = ids_json(space, req.U);
              j["V"] = ids_json(space, req.V);
              j["xi"] = req.xi;
              const auto path = out_dir / ("ratio_" + std::to_string(ratio_count++) + ".csv");
              write_series_csv(path, {"t", "z"}, {traj->times, diag.z});
              add_file(path);
              j["file"] = path.filename().string();
              report["ratio"].push_back(std::move(j));
            } else if constexpr (std::is_same_v<T, request::Equilibrium>) {
              std::vector<double> x0 = req.x_init ? *req.x_init
                                                  : std::vector<double>(traj->final_state().weights().begin(),
                                                                        traj->final_state().weights().end());
              const auto res = find_equilibrium(sc.kernel, sc.model, x0, req.newton_tol);
              Json j = report_json(space, res);
              j["l1_to_dirac"] = l1_to_dirac(res.x_star, profile.fittest(), profile.Kd);
              j["newton_tol"] = req.newton_tol;
              report["equilibrium"] = j;
              summary["eq_converged"] = res.converged;
              summary["eq_l1_to_dirac"] = j["l1_to_dirac"];
              summary["eq_spectral_bound"] = j["spectral_bound"];
              const auto path = out_dir / "equilibrium.csv";
              std::vector<double> ids(n);
              for (std::size_t q = 0; q < n; ++q) ids[q] = static_cast<double>(q);
              write_series_csv(path, {"atom_index", "x_star"},
                               {ids, std::vector<double>(res.x_star.weights().begin(), res.x_star.weights().end())});
              add_file(path);
            } else if constexpr (std::is_same_v<T, request::Continuation>) {
              std::vector<double> x0 = req.x_init ? *req.x_init : [&] {
                std::vector<double> v(n, 0.0);
                v[profile.fittest()] = profile.Kd;
                return v;
              }();
              const auto entries = continuation(req.base, req.target, sc.model, req.eps, x0, req.newton_tol);
              Json arr = Json::array();
              std::vector<double> eps_col, l1_col, sb_col, res_col, kd_col, conv_col;
              for (const auto& e : entries) {
                const double l1 = l1_to_dirac(e.result.x_star, profile.fittest(), profile.Kd);
                Json j = report_json(space, e.result);
                j.erase("jacobian");
                j["eps"] = e.eps;
                j["kernel_distance"] = e.kernel_distance;
                j["l1_to_dirac"] = l1;
                arr.push_back(std::move(j));
                eps_col.push_back(e.eps);
                l1_col.push_back(l1);
                sb_col.push_back(e.result.spectral_bound);
                res_col.push_back(e.result.residual);
                kd_col.push_back(e.kernel_distance);
                conv_col.push_back(e.result.converged ? 1.0 : 0.0);
              }
              report["continuation"] = arr;
              const auto path = out_dir / "continuation.csv";
              write_series_csv(path,
                               {"eps", "converged", "residual", "spectral_bound", "kernel_distance", "l1_to_dirac"},
                               {eps_col, conv_col, res_col, sb_col, kd_col, l1_col});
              add_file(path);
            } else if constexpr (std::is_same_v<T, request::IntegralRepresentation>) {
              report["integral_representation"] = {
                  {"max_relative_error", verify_integral_representation(*traj, sc.model)},
                  {"quadrature", "trapezoid+hermite-endpoint-terms"}};
            } else if constexpr (std::is_same_v<T, request::Ess>) {
              Json arr = Json::array();
              for (std::size_t q = 0; q < n; ++q) {
                Json j = report_json(space, is_ess(sc.model, profile, q, req.tol));
                j["atom"] = space.atom(q).id;
                arr.push_back(std::move(j));
              }
              report["ess"] = arr;
            } else if constexpr (std::is_same_v<T, request::Superiority>) {
              report["superiority"] = report_json(space, check_superiority(sc.model, profile, req.grid));
            }
          },
          *r);
    }
    report["status"] = "ok";
  } catch (const Error& e) {
    out.exit_code = kExitNumeric;
    out.message = e.what();
    report["status"] = "numeric_failure";
    report["error"] = e.what();
  }
  report["summary"] = summary;
  const auto path = out_dir / "report.json";
  write_json(path, report);
  out.files.push_back(path);
  return out;
}

RunOutcome run_scenario_file(const fs::path& path, Command command, const fs::path& out_dir, std::uint64_t seed) {
  try {
    const auto sc = load_scenario(path, seed);
    return run_scenario(sc, command, out_dir);
  } catch (const ValidationError& e) {
    RunOutcome out;
    out.exit_code = kExitValidation;
    out.message = e.what();
    out.report = {{"status", "validation_error"}, {"issues", e.issues()}};
    return out;
  }
}

SweepOutcome sweep(const fs::path& path, const std::string& parameter, const std::vector<double>& values,
                   Command command, const fs::path& out_dir, std::uint64_t seed) {
  SweepOutcome out;
  auto reject = [&](const std::string& why) {
    out.exit_code = kExitValidation;
    out.message = why;
    out.report = {{"status", "validation_error"}, {"issues", {why}}};
    return out;
  };
  if (values.empty()) return reject("sweep: the values list is empty");
  Json doc;
  try {
    doc = read_scenario_json(path);
  } catch (const ValidationError& e) {
    return reject(e.what());
  }
  const auto dot = parameter.find('.');
  if (dot == std::string::npos) return reject("sweep: parameter must look like section.field");
  const std::string section = parameter.substr(0, dot);
  const std::string field = parameter.substr(dot + 1);
  bool sweepable = false;
  if (parameter == "kernel.eps")
    sweepable = doc.contains("kernel") && doc["kernel"].is_object() && doc["kernel"].value("type", "") == "blend";
  else if (parameter == "initial.total")
    sweepable = doc.contains("initial") && doc["initial"].is_object();
  else if (section == "model")
    sweepable = doc.contains("model") && doc["model"].is_object() && doc["model"].contains(field) &&
                doc["model"][field].is_number();
  if (!sweepable)
    return reject("sweep: '" + parameter +
                  "' is not sweepable here (kernel.eps needs a blend kernel; model.<field> must be a scalar)");
  for (double v : values)
    if (!std::isfinite(v)) return reject("sweep: values must be finite");

  fs::create_directories(out_dir);
  std::vector<std::future<RunOutcome>> runs;
  for (std::size_t i = 0; i < values.size(); ++i) {
    Json variant = doc;
    variant[section][field] = values[i];
    std::ostringstream dir;
    dir << "run_" << std::setw(3) << std::setfill('0') << i;
    const fs::path run_dir = out_dir / dir.str();
    runs.push_back(std::async(std::launch::async, [variant = std::move(variant), run_dir, command, seed,
                                                   base = path.parent_path()] {
      try {
        return run_scenario(parse_scenario(variant, base, seed), command, run_dir);
      } catch (const ValidationError& e) {
        RunOutcome o;
        o.exit_code = kExitValidation;
        o.message = e.what();
        o.report = {{"status", "validation_error"}, {"issues", e.issues()}};
        return o;
      }
    }));
  }

  Json merged = {{"parameter", parameter}, {"runs", Json::array()}};
  const std::vector<std::string> cols{"final_total", "tail_max_total", "ass_converged",
                                      "eq_converged", "eq_l1_to_dirac", "eq_spectral_bound"};
  std::ofstream csv(out_dir / "sweep.csv");
  csv << std::setprecision(17) << "value,exit_code";
  for (const auto& c : cols) csv << ',' << c;
  csv << '\n';
  for (std::size_t i = 0; i < runs.size(); ++i) {
    RunOutcome r = runs[i].get();
    out.exit_code = std::max(out.exit_code, r.exit_code);
    const Json summary = r.report.value("summary", Json::object());
    csv << values[i] << ',' << r.exit_code;
    for (const auto& c : cols) {
      csv << ',';
      if (!summary.contains(c) || summary[c].is_null()) continue;
      if (summary[c].is_boolean())
        csv << (summary[c].get<bool>() ? 1 : 0);
      else
        csv << summary[c].get<double>();
    }
    csv << '\n';
    Json entry = {{"value", values[i]}, {"exit_code", r.exit_code}, {"summary", summary}};
    if (!r.message.empty()) entry["message"] = r.message;
    merged["runs"].push_back(std::move(entry));
  }
  merged["status"] = out.exit_code == kExitOk ? "ok" : "partial_failure";
  write_json(out_dir / "sweep.json", merged);
  out.report = std::move(merged);
  return out;
}

}  // namespace selmut

#include "agentfield/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace agentfield {

namespace pt = boost::property_tree;

namespace {

std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(s, &used);
    return used == s.size() && std::isfinite(out);
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_unsigned(const std::string& s, std::uint64_t& out) {
  if (s.empty() || s[0] == '-' || s[0] == '+') return false;
  try {
    std::size_t used = 0;
    out = std::stoull(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

// Reads typed values out of the tree, remembering which keys were consumed
// and collecting every problem instead of stopping at the first.
class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  std::optional<std::string> raw(const std::string& section, const std::string& key) {
    known_[section].insert(key);
    const auto sec = tree_.get_child_optional(section);
    if (!sec) return std::nullopt;
    const auto v = sec->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    return *v;
  }

  void number(const std::string& sec, const std::string& key, double& out) {
    if (auto v = raw(sec, key)) {
      if (!parse_double(*v, out)) fail(sec, key, "expected a finite number, got '" + *v + "'");
    }
  }
  void number(const std::string& sec, const std::string& key, std::optional<double>& out) {
    if (auto v = raw(sec, key)) {
      double d = 0.0;
      if (parse_double(*v, d)) {
        out = d;
      } else {
        fail(sec, key, "expected a finite number, got '" + *v + "'");
      }
    }
  }
  template <class T>
  void count(const std::string& sec, const std::string& key, T& out) {
    if (auto v = raw(sec, key)) {
      std::uint64_t u = 0;
      if (parse_unsigned(*v, u)) {
        out = static_cast<T>(u);
      } else {
        fail(sec, key, "expected a nonnegative integer, got '" + *v + "'");
      }
    }
  }
  void count(const std::string& sec, const std::string& key, std::optional<std::size_t>& out) {
    std::size_t v = 0;
    if (raw(sec, key)) {
      const std::size_t before = problems_.size();
      count(sec, key, v);
      if (problems_.size() == before) out = v;
    }
  }
  void point(const std::string& sec, const std::string& key, Point& out, std::size_t dim) {
    if (auto v = raw(sec, key)) {
      const auto parts = split_list(*v);
      if (parts.size() != 1 && parts.size() != dim) {
        fail(sec, key, "expected 1 or " + std::to_string(dim) + " numbers, got '" + *v + "'");
        return;
      }
      Point p{};
      for (std::size_t a = 0; a < dim; ++a) {
        if (!parse_double(parts[parts.size() == 1 ? 0 : a], p[a])) {
          fail(sec, key, "expected numbers, got '" + *v + "'");
          return;
        }
      }
      out = p;
    }
  }
  void text(const std::string& sec, const std::string& key, std::string& out) {
    if (auto v = raw(sec, key)) out = *v;
  }

  void fail(const std::string& sec, const std::string& key, const std::string& what) {
    problems_.push_back(sec + "." + key + ": " + what);
  }
  void require(bool ok, const std::string& sec, const std::string& key, const std::string& what) {
    if (!ok) fail(sec, key, what);
  }

  void report_unknown() {
    for (const auto& [section, body] : tree_) {
      if (body.empty() && !body.data().empty()) {
        problems_.push_back(section + ": key outside any section");
        continue;
      }
      const auto it = known_.find(section);
      if (it == known_.end()) {
        problems_.push_back("[" + section + "]: unknown section");
        continue;
      }
      for (const auto& [key, value] : body) {
        if (!it->second.count(key)) problems_.push_back(section + "." + key + ": unknown key");
      }
    }
  }

  [[nodiscard]] const std::vector<std::string>& problems() const { return problems_; }

 private:
  const pt::ptree& tree_;
  std::map<std::string, std::set<std::string>> known_;
  std::vector<std::string> problems_;
};

std::string point_text(const Point& p, std::size_t dim) {
  std::string s;
  for (std::size_t a = 0; a < dim; ++a) s += (a ? " " : "") + format_double(p[a]);
  return s;
}

}  // namespace

double RunConfig::effective_margin() const {
  return margin ? *margin : 10.0 * std::max(kernels.p_sigma, kernels.pprime_sigma);
}

std::size_t RunConfig::effective_cells() const {
  if (cells) return *cells;
  return dim == 1 ? 256 : dim == 2 ? 64 : 24;
}

ConfigValidationError::ConfigValidationError(std::vector<std::string> problems)
    : ConfigError("invalid configuration:\n  " + join(problems, "\n  ")), problems_(std::move(problems)) {}

LoadedConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigValidationError({std::string("syntax: ") + e.message() + " (line " + std::to_string(e.line()) + ")"});
  }
  Reader r(tree);
  RunConfig c;

  r.count("domain", "dim", c.dim);
  const bool dim_ok = c.dim >= 1 && c.dim <= kMaxDim;
  r.require(dim_ok, "domain", "dim", "must be 1, 2 or 3");
  const std::size_t d = dim_ok ? c.dim : 1;
  r.point("domain", "lower", c.lower, d);
  r.point("domain", "upper", c.upper, d);
  for (std::size_t a = 0; a < d; ++a) {
    r.require(c.lower[a] < c.upper[a], "domain", "upper", "must exceed domain.lower on axis " + std::to_string(a));
  }
  r.number("domain", "margin", c.margin);

  KernelParams& k = c.kernels;
  r.number("kernels", "eps_q", k.eps_q);
  r.number("kernels", "q_sigma", k.q_sigma);
  std::string q0 = "uniform";
  r.text("kernels", "q0", q0);
  r.number("kernels", "q0_sigma", k.q0_sigma);
  r.number("kernels", "p_sigma", k.p_sigma);
  r.number("kernels", "pprime_sigma", k.pprime_sigma);
  r.require(k.eps_q > 0.0 && k.eps_q < 1.0, "kernels", "eps_q", "must lie in (0, 1)");
  r.require(k.q_sigma > 0.0, "kernels", "q_sigma", "must be positive");
  r.require(k.p_sigma > 0.0, "kernels", "p_sigma", "must be positive");
  r.require(k.pprime_sigma > 0.0, "kernels", "pprime_sigma", "must be positive");
  if (q0 == "uniform") {
    k.q0_kind = Q0Kind::Uniform;
  } else if (q0 == "gaussian") {
    k.q0_kind = Q0Kind::TruncatedGaussian;
    r.require(k.q0_sigma > 0.0, "kernels", "q0_sigma", "must be positive");
  } else {
    r.fail("kernels", "q0", "must be 'uniform' or 'gaussian', got '" + q0 + "'");
  }
  const double max_sigma = std::max(k.p_sigma, k.pprime_sigma);
  r.require(c.effective_margin() >= 6.0 * max_sigma, "domain", "margin",
            "must be at least 6 * max(p_sigma, pprime_sigma) = " + format_double(6.0 * max_sigma));

  r.number("dynamics", "eps", c.eps);
  r.number("dynamics", "lambda", c.lambda);
  r.require(c.eps >= 0.0 && c.eps <= 1.0, "dynamics", "eps", "must lie in [0, 1]");
  r.require(c.lambda >= 0.0, "dynamics", "lambda", "must be >= 0");

  InitialCondition& ic = c.init;
  r.point("init", "m0_center", ic.m0_center, d);
  r.number("init", "m0_sigma", ic.m0_sigma);
  r.point("init", "eta0_center", ic.eta0_center, d);
  r.number("init", "eta0_sigma", ic.eta0_sigma);
  r.require(ic.eta0_sigma > 0.0, "init", "eta0_sigma", "must be positive");
  if (ic.m0_sigma > 0.0) {
    for (std::size_t a = 0; a < d; ++a) {
      r.require(ic.m0_center[a] >= c.lower[a] && ic.m0_center[a] <= c.upper[a], "init", "m0_center",
                "must lie in the domain");
    }
  }

  r.count("grid", "cells", c.cells);
  r.require(c.effective_cells() >= 2, "grid", "cells", "must be >= 2");

  r.count("run", "n_agents", c.n_agents);
  r.count("run", "horizon", c.horizon);
  r.count("run", "seed", c.seed);
  r.count("run", "parallel", c.parallel);
  std::string mode = "grid";
  r.text("run", "field_mode", mode);
  r.count("run", "mixture_budget", c.mixture_budget);
  if (auto v = r.raw("run", "snapshots")) {
    for (const std::string& part : split_list(*v)) {
      std::uint64_t u = 0;
      if (parse_unsigned(part, u)) {
        c.snapshots.push_back(static_cast<std::size_t>(u));
      } else {
        r.fail("run", "snapshots", "expected step indices, got '" + *v + "'");
        break;
      }
    }
  }
  r.require(c.n_agents >= 1, "run", "n_agents", "must be >= 1");
  r.require(c.parallel >= 1, "run", "parallel", "must be >= 1");
  r.require(c.mixture_budget >= 1, "run", "mixture_budget", "must be >= 1");
  if (mode == "grid") {
    c.field_mode = FieldMode::Grid;
  } else if (mode == "mixture") {
    c.field_mode = FieldMode::Mixture;
  } else {
    r.fail("run", "field_mode", "must be 'grid' or 'mixture', got '" + mode + "'");
  }
  for (std::size_t s : c.snapshots) {
    r.require(s <= c.horizon, "run", "snapshots", "step " + std::to_string(s) + " exceeds run.horizon");
  }

  r.number("net", "a", c.net_a);
  r.number("net", "b", c.net_b);
  r.number("net", "delta", c.net_delta);
  r.count("net", "cap", c.net_cap);
  r.require(c.net_a > 0.0, "net", "a", "must be positive");
  r.require(c.net_b > 0.0, "net", "b", "must be positive");
  r.require(c.net_delta > 0.0, "net", "delta", "must be positive");
  r.require(c.net_cap >= 1, "net", "cap", "must be >= 1");

  r.number("fixed_point", "tol", c.fp_tol);
  r.count("fixed_point", "max_iter", c.fp_max_iter);
  r.require(c.fp_tol > 0.0, "fixed_point", "tol", "must be positive");
  r.require(c.fp_max_iter >= 1, "fixed_point", "max_iter", "must be >= 1");

  if (auto v = r.raw("experiments", "checks")) {
    for (const std::string& name : split_list(*v)) {
      if (name == "all") continue;
      const auto& cat = check_catalog();
      const bool known = std::any_of(cat.begin(), cat.end(), [&](const CheckInfo& i) { return i.name == name; });
      if (known) {
        c.checks.push_back(name);
      } else {
        r.fail("experiments", "checks", "unknown check '" + name + "'");
      }
    }
  }

  r.text("output", "dir", c.output_dir);

  r.report_unknown();
  if (!r.problems().empty()) throw ConfigValidationError(r.problems());

  LoadedConfig out{c, {}};
  const KernelBank bank = derive_constants(c.kernels, make_domain(c));
  const ContractionConstants cc = compute_constants(c.eps, c.lambda, bank);
  if (!cc.feasible) {
    out.warnings.push_back("dynamics: (eps, lambda) = (" + format_double(c.eps) + ", " + format_double(c.lambda) +
                           ") is outside the contraction region; fixed-point and long-horizon guarantees do not apply");
  }
  return out;
}

LoadedConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string render_config(const RunConfig& c) {
  const std::size_t d = c.dim;
  std::ostringstream os;
  os << "[domain]\n"
     << "dim = " << c.dim << "\n"
     << "lower = " << point_text(c.lower, d) << "\n"
     << "upper = " << point_text(c.upper, d) << "\n"
     << "margin = " << format_double(c.effective_margin()) << "\n\n";
  const KernelParams& k = c.kernels;
  os << "[kernels]\n"
     << "eps_q = " << format_double(k.eps_q) << "\n"
     << "q_sigma = " << format_double(k.q_sigma) << "\n"
     << "q0 = " << (k.q0_kind == Q0Kind::Uniform ? "uniform" : "gaussian") << "\n"
     << "q0_sigma = " << format_double(k.q0_sigma) << "\n"
     << "p_sigma = " << format_double(k.p_sigma) << "\n"
     << "pprime_sigma = " << format_double(k.pprime_sigma) << "\n\n";
  os << "[dynamics]\n"
     << "eps = " << format_double(c.eps) << "\n"
     << "lambda = " << format_double(c.lambda) << "\n\n";
  os << "[init]\n"
     << "m0_center = " << point_text(c.init.m0_center, d) << "\n"
     << "m0_sigma = " << format_double(c.init.m0_sigma) << "\n"
     << "eta0_center = " << point_text(c.init.eta0_center, d) << "\n"
     << "eta0_sigma = " << format_double(c.init.eta0_sigma) << "\n\n";
  os << "[grid]\n"
     << "cells = " << c.effective_cells() << "\n\n";
  std::vector<std::string> snaps;
  for (std::size_t s : c.snapshots) snaps.push_back(std::to_string(s));
  os << "[run]\n"
     << "n_agents = " << c.n_agents << "\n"
     << "horizon = " << c.horizon << "\n"
     << "seed = " << c.seed << "\n"
     << "field_mode = " << (c.field_mode == FieldMode::Grid ? "grid" : "mixture") << "\n"
     << "mixture_budget = " << c.mixture_budget << "\n"
     << "snapshots = " << join(snaps, " ") << "\n\n";
  os << "[net]\n"
     << "a = " << format_double(c.net_a) << "\n"
     << "b = " << format_double(c.net_b) << "\n"
     << "delta = " << format_double(c.net_delta) << "\n"
     << "cap = " << c.net_cap << "\n\n";
  os << "[fixed_point]\n"
     << "tol = " << format_double(c.fp_tol) << "\n"
     << "max_iter = " << c.fp_max_iter << "\n\n";
  os << "[experiments]\n"
     << "checks = " << (c.checks.empty() ? std::string("all") : join(c.checks, " ")) << "\n";
  return os.str();
}

std::string config_hash(const RunConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(render_config(c))));
  return buf;
}

BoxDomain make_domain(const RunConfig& c) {
  return BoxDomain::make(c.dim, c.lower, c.upper, c.effective_margin());
}

Model make_model(const RunConfig& c) {
  return Model(make_domain(c), c.kernels, c.effective_cells(), c.eps, c.lambda);
}

SystemOptions system_options(const RunConfig& c) {
  SystemOptions o;
  o.n_agents = c.n_agents;
  o.horizon = c.horizon;
  o.seed = c.seed;
  o.threads = c.parallel;
  o.mode = c.field_mode;
  o.mixture_budget = c.mixture_budget;
  o.snapshot_steps = c.snapshots;
  return o;
}

Setup make_setup(const RunConfig& c) {
  const BoxDomain dom = make_domain(c);
  return Setup{make_model(c), c.init, build_net(c.net_a, c.net_b, c.net_delta, dom, c.net_cap), c.seed, c.parallel};
}

}  // namespace agentfield

#pragma once

// Uniform fit/predict contract over every regression method.

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ews/core/error.hpp"
#include "ews/core/text.hpp"
#include "ews/design_matrix.hpp"
#include "ews/learners/bart.hpp"
#include "ews/learners/gradient_boost.hpp"
#include "ews/learners/knn.hpp"
#include "ews/learners/mars.hpp"
#include "ews/learners/neural_net.hpp"
#include "ews/learners/pcr.hpp"
#include "ews/learners/random_forest.hpp"
#include "ews/learners/svr.hpp"
#include "ews/staging.hpp"

namespace ews {

enum class Method { rf, bart, xgb, pcr, svr, nn, mars, knn, mean };

inline const std::vector<Method>& benchmark_methods() {
  static const std::vector<Method> v{Method::rf,  Method::bart, Method::xgb,  Method::pcr,
                                     Method::svr, Method::nn,   Method::mars, Method::knn};
  return v;
}

inline std::string method_name(Method m) {
  switch (m) {
    case Method::rf: return "rf";
    case Method::bart: return "bart";
    case Method::xgb: return "xgb";
    case Method::pcr: return "pcr";
    case Method::svr: return "svr";
    case Method::nn: return "nn";
    case Method::mars: return "mars";
    case Method::knn: return "knn";
    case Method::mean: return "mean";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (Method m : {Method::rf, Method::bart, Method::xgb, Method::pcr, Method::svr, Method::nn, Method::mars,
                   Method::knn, Method::mean})
    if (method_name(m) == s) return m;
  throw ArgumentError("unknown method '" + std::string(s) + "'");
}

// Only the random forest splits categorical columns natively.
inline bool takes_categoricals(Method m) { return m == Method::rf; }

struct MeanConfig {};

using MethodParams = std::variant<learners::RandomForestConfig, learners::BartConfig, learners::GradientBoostConfig,
                                  learners::PcrConfig, learners::SvrConfig, learners::NeuralNetConfig,
                                  learners::MarsConfig, learners::KnnConfig, MeanConfig>;

struct LearnerConfig {
  Method method = Method::mean;
  MethodParams params = MeanConfig{};
  std::uint64_t seed = 1;

  static LearnerConfig defaults(Method m, std::uint64_t seed = 1) {
    LearnerConfig c;
    c.method = m;
    c.seed = seed;
    switch (m) {
      case Method::rf: c.params = learners::RandomForestConfig{}; break;
      case Method::bart: c.params = learners::BartConfig{}; break;
      case Method::xgb: c.params = learners::GradientBoostConfig{}; break;
      case Method::pcr: c.params = learners::PcrConfig{}; break;
      case Method::svr: c.params = learners::SvrConfig{}; break;
      case Method::nn: c.params = learners::NeuralNetConfig{}; break;
      case Method::mars: c.params = learners::MarsConfig{}; break;
      case Method::knn: c.params = learners::KnnConfig{}; break;
      case Method::mean: c.params = MeanConfig{}; break;
    }
    return c;
  }
};

namespace detail {

template <class T>
std::vector<T> parse_list(std::string_view v, T (*one)(std::string_view)) {
  std::vector<T> out;
  for (auto& s : text::split_list(v)) out.push_back(one(s));
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

inline int to_int(std::string_view s) {
  auto v = text::parse_int(s);
  if (!v) throw ConfigError("expected an integer, got '" + std::string(s) + "'");
  return static_cast<int>(*v);
}
inline double to_double(std::string_view s) {
  auto v = text::parse_double(s);
  if (!v) throw ConfigError("expected a number, got '" + std::string(s) + "'");
  return *v;
}
inline bool to_bool(std::string_view s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("expected true/false, got '" + std::string(s) + "'");
}
inline learners::KnnKernel to_kernel(std::string_view s) {
  if (s == "rectangular") return learners::KnnKernel::rectangular;
  if (s == "triangular") return learners::KnnKernel::triangular;
  throw ConfigError("unknown kernel '" + std::string(s) + "'");
}

}  // namespace detail

// Applies `<param> = <value>` to a method's hyperparameters. Unknown
// parameters and out-of-range values raise ConfigError.
inline void apply_override(LearnerConfig& cfg, const std::string& param, const std::string& value) {
  using namespace detail;
  auto bad = [&] { return ConfigError("unknown parameter '" + method_name(cfg.method) + "." + param + "'"); };
  auto need = [&](bool ok) {
    if (!ok) throw ConfigError("value '" + value + "' out of range for " + method_name(cfg.method) + "." + param);
  };
  try {
    std::visit(
        [&](auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, learners::RandomForestConfig>) {
            if (param == "n_trees") p.n_trees = to_int(value), need(p.n_trees >= 1);
            else if (param == "mtry") p.mtry = to_int(value), need(p.mtry >= 0);
            else if (param == "min_leaf") p.min_leaf = to_int(value), need(p.min_leaf >= 1);
            else throw bad();
          } else if constexpr (std::is_same_v<T, learners::BartConfig>) {
            if (param == "n_trees") p.n_trees = to_int(value), need(p.n_trees >= 1);
            else if (param == "burn_in") p.burn_in = to_int(value), need(p.burn_in >= 0);
            else if (param == "post_draws") p.post_draws = to_int(value), need(p.post_draws >= 1);
            else if (param == "alpha") p.alpha = to_double(value), need(p.alpha > 0 && p.alpha < 1);
            else if (param == "beta") p.beta = to_double(value), need(p.beta >= 0);
            else if (param == "k") p.k = to_double(value), need(p.k > 0);
            else if (param == "q") p.q = to_double(value), need(p.q > 0 && p.q < 1);
            else if (param == "nu") p.nu = to_double(value), need(p.nu > 0);
            else throw bad();
          } else if constexpr (std::is_same_v<T, learners::GradientBoostConfig>) {
            if (param == "eta") p.eta = to_double(value), need(p.eta > 0 && p.eta <= 1);
            else if (param == "max_depth") p.max_depth = to_int(value), need(p.max_depth >= 0);
            else if (param == "rounds") p.rounds = to_int(value), need(p.rounds >= 0);
            else throw bad();
          } else if constexpr (std::is_same_v<T, learners::PcrConfig>) {
            if (param == "var_floor") p.var_floor = to_double(value), need(p.var_floor >= 0 && p.var_floor <= 100);
            else if (param == "var_cap") p.var_cap = to_double(value), need(p.var_cap > 0 && p.var_cap <= 100);
            else if (param == "retain_all") p.retain_all = to_bool(value);
            else if (param == "scale") p.scale = to_bool(value);
            else throw bad();
          } else if constexpr (std::is_same_v<T, learners::SvrConfig>) {
            if (param == "C") p.C = to_double(value), need(p.C > 0);
            else if (param == "epsilon") p.epsilon = to_double(value), need(p.epsilon >= 0);
            else if (param == "gamma") p.gamma = to_double(value), need(p.gamma >= 0);
            else if (param == "tolerance") p.tolerance = to_double(value), need(p.tolerance > 0);
            else throw bad();
          } else if constexpr (std::is_same_v<T, learners::NeuralNetConfig>) {
            if (param == "sizes") {
              p.sizes = parse_list<int>(value, to_int);
              for (int s : p.sizes) need(s >= 1);
            } else if (param == "decays") {
              p.decays = parse_list<double>(value, to_double);
              for (double d : p.decays) need(d >= 0);
            } else if (param == "max_iter") p.max_iter = to_int(value), need(p.max_iter >= 1);
            else if (param == "inner_folds") p.inner_folds = to_int(value), need(p.inner_folds >= 2);
            else throw bad();
          } else if constexpr (std::is_same_v<T, learners::MarsConfig>) {
            if (param == "degrees") {
              p.degrees = parse_list<int>(value, to_int);
              for (int d : p.degrees) need(d >= 1);
            } else if (param == "nprune") p.nprune = to_int(value), need(p.nprune >= 1);
            else if (param == "max_terms") p.max_terms = to_int(value), need(p.max_terms >= 1);
            else if (param == "thresh") p.thresh = to_double(value), need(p.thresh >= 0);
            else if (param == "inner_folds") p.inner_folds = to_int(value), need(p.inner_folds >= 2);
            else throw bad();
          } else if constexpr (std::is_same_v<T, learners::KnnConfig>) {
            if (param == "kmax") p.kmax = to_int(value), need(p.kmax >= 1);
            else if (param == "k") p.k = to_int(value), need(*p.k >= 1);
            else if (param == "kernels") p.kernels = parse_list<learners::KnnKernel>(value, to_kernel);
            else throw bad();
          } else {
            throw bad();
          }
        },
        cfg.params);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("bad value for " + method_name(cfg.method) + "." + param + ": " + e.what());
  }
}

// Canonical one-line description of the hyperparameters (for dumps and
// config echoes).
inline std::string describe(const LearnerConfig& cfg) {
  std::ostringstream o;
  auto d = [](double v) { return text::format_double(v); };
  std::visit(
      [&](auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, learners::RandomForestConfig>)
          o << "n_trees=" << p.n_trees << " mtry=" << p.mtry << " min_leaf=" << p.min_leaf;
        else if constexpr (std::is_same_v<T, learners::BartConfig>)
          o << "n_trees=" << p.n_trees << " burn_in=" << p.burn_in << " post_draws=" << p.post_draws
            << " alpha=" << d(p.alpha) << " beta=" << d(p.beta) << " k=" << d(p.k) << " q=" << d(p.q)
            << " nu=" << d(p.nu);
        else if constexpr (std::is_same_v<T, learners::GradientBoostConfig>)
          o << "eta=" << d(p.eta) << " max_depth=" << p.max_depth << " rounds=" << p.rounds;
        else if constexpr (std::is_same_v<T, learners::PcrConfig>)
          o << "var_floor=" << d(p.var_floor) << " var_cap=" << d(p.var_cap) << " retain_all=" << p.retain_all
            << " scale=" << p.scale;
        else if constexpr (std::is_same_v<T, learners::SvrConfig>)
          o << "C=" << d(p.C) << " epsilon=" << d(p.epsilon) << " gamma=" << d(p.gamma)
            << " tolerance=" << d(p.tolerance);
        else if constexpr (std::is_same_v<T, learners::NeuralNetConfig>) {
          std::vector<std::string> s, dc;
          for (int v : p.sizes) s.push_back(std::to_string(v));
          for (double v : p.decays) dc.push_back(d(v));
          o << "sizes=" << text::join(s, ";") << " decays=" << text::join(dc, ";") << " max_iter=" << p.max_iter
            << " inner_folds=" << p.inner_folds;
        } else if constexpr (std::is_same_v<T, learners::MarsConfig>) {
          std::vector<std::string> s;
          for (int v : p.degrees) s.push_back(std::to_string(v));
          o << "degrees=" << text::join(s, ";") << " nprune=" << p.nprune << " max_terms=" << p.max_terms
            << " thresh=" << d(p.thresh) << " inner_folds=" << p.inner_folds;
        } else if constexpr (std::is_same_v<T, learners::KnnConfig>) {
          std::vector<std::string> s;
          for (auto k : p.kernels) s.push_back(learners::kernel_name(k));
          o << "kmax=" << p.kmax << " k=" << (p.k ? std::to_string(*p.k) : "auto") << " kernels=" << text::join(s, ";");
        } else {
          o << "(none)";
        }
      },
      cfg.params);
  return o.str();
}

struct MeanModel {
  double value = 0.0;
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const { return Eigen::VectorXd::Constant(x.rows(), value); }
};

using ModelState = std::variant<learners::RandomForestModel, learners::BartModel, learners::GradientBoostModel,
                                learners::PcrModel, learners::SvrModel, learners::NeuralNetModel, learners::MarsModel,
                                learners::KnnModel, MeanModel>;

// A fitted predictor plus the column manifest it was trained on. Prediction
// inputs are aligned to the manifest by name, so column order does not
// matter but every training column must be present.
class FittedModel {
 public:
  LearnerConfig config;
  std::vector<ColumnInfo> manifest;       // training columns, before encoding
  std::vector<ColumnInfo> model_columns;  // columns seen by the model (after encoding)
  bool encoded = false;
  ModelState state;

  Method method() const { return config.method; }

  std::vector<std::string> manifest_names() const {
    std::vector<std::string> out;
    for (auto& c : manifest) out.push_back(c.name);
    return out;
  }

  Eigen::MatrixXd prepare(const DesignMatrix& rows) const {
    DesignMatrix aligned;
    aligned.values = align_columns(rows, manifest_names());
    aligned.columns = manifest;
    for (std::size_t j = 0; j < manifest.size(); ++j) {
      if (manifest[j].kind != ColumnKind::categorical) continue;
      for (Eigen::Index i = 0; i < aligned.rows(); ++i) {
        double v = aligned.values(i, static_cast<Eigen::Index>(j));
        if (v < 0 || v >= manifest[j].n_levels() || v != std::floor(v))
          throw ArgumentError("column '" + manifest[j].name + "' holds an invalid level index");
      }
    }
    if (!encoded) return aligned.values;
    return one_hot(aligned).numeric.values;
  }

  Eigen::VectorXd predict(const DesignMatrix& rows) const {
    Eigen::MatrixXd x = prepare(rows);
    Eigen::VectorXd out = std::visit([&](const auto& m) { return Eigen::VectorXd(m.predict(x)); }, state);
    if (!out.allFinite()) throw TrainingError(method_name(method()) + " produced non-finite predictions");
    return out;
  }

  // Per-column importance for methods that define one (tree ensembles: total
  // split gain; PCR: |coefficient| times column sd is left to callers).
  std::vector<std::pair<std::string, double>> importance() const {
    std::vector<double> imp;
    if (auto* rf = std::get_if<learners::RandomForestModel>(&state)) imp = rf->importance;
    else if (auto* gb = std::get_if<learners::GradientBoostModel>(&state)) imp = gb->importance;
    else if (auto* bt = std::get_if<learners::BartModel>(&state)) imp = bart_split_counts(*bt);
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t j = 0; j < imp.size() && j < model_columns.size(); ++j) out.emplace_back(model_columns[j].name, imp[j]);
    std::stable_sort(out.begin(), out.end(), [](auto& a, auto& b) { return a.second > b.second; });
    return out;
  }

  void dump(std::ostream& os) const {
    os << "method=" << method_name(method()) << '\n';
    os << "seed=" << config.seed << '\n';
    os << "config=" << describe(config) << '\n';
    os << "encoded=" << (encoded ? "one_hot" : "native") << '\n';
    os << "columns=";
    for (std::size_t j = 0; j < manifest.size(); ++j) os << (j ? "," : "") << manifest[j].name;
    os << '\n';
    os << "summary=" << summary() << '\n';
    auto imp = importance();
    if (!imp.empty()) {
      os << "importance\n";
      for (auto& [name, v] : imp) os << name << ',' << text::format_double(v) << '\n';
    }
  }

  std::string summary() const {
    std::ostringstream o;
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, learners::RandomForestModel>)
            o << "trees=" << m.trees.size() << " oob_mse=" << text::format_double(m.oob_mse);
          else if constexpr (std::is_same_v<T, learners::BartModel>)
            o << "draws=" << m.draws.size() << " acceptance=" << text::format_double(m.acceptance_rate);
          else if constexpr (std::is_same_v<T, learners::GradientBoostModel>)
            o << "rounds=" << m.trees.size() << " training_mse=" << text::format_double(m.training_mse.back());
          else if constexpr (std::is_same_v<T, learners::PcrModel>)
            o << "components=" << m.components;
          else if constexpr (std::is_same_v<T, learners::SvrModel>)
            o << "support_vectors=" << m.coef.size() << " gamma=" << text::format_double(m.gamma)
              << " kkt=" << text::format_double(m.kkt_violation);
          else if constexpr (std::is_same_v<T, learners::NeuralNetModel>)
            o << "size=" << m.hidden << " decay=" << text::format_double(m.decay);
          else if constexpr (std::is_same_v<T, learners::MarsModel>)
            o << "degree=" << m.degree << " terms=" << m.terms.size() << " gcv=" << text::format_double(m.gcv);
          else if constexpr (std::is_same_v<T, learners::KnnModel>)
            o << "k=" << m.k << " kernel=" << learners::kernel_name(m.kernel);
          else
            o << "mean=" << text::format_double(m.value);
        },
        state);
    return o.str();
  }

 private:
  std::vector<double> bart_split_counts(const learners::BartModel& m) const {
    std::vector<double> c(model_columns.size(), 0.0);
    for (auto& draw : m.draws)
      for (auto& nd : draw)
        if (nd.var >= 0) c[static_cast<std::size_t>(nd.var)] += 1.0;
    for (auto& v : c) v /= std::max<std::size_t>(1, m.draws.size());
    return c;
  }
};

inline FittedModel fit(const DesignMatrix& m, const Eigen::VectorXd& y, const LearnerConfig& cfg) {
  if (m.rows() != y.size()) throw ArgumentError("design rows and response length differ");
  FittedModel fm;
  fm.config = cfg;
  fm.manifest = m.columns;
  fm.encoded = !takes_categoricals(cfg.method) && !m.all_numeric();
  DesignMatrix enc = fm.encoded ? one_hot(m).numeric : m;
  fm.model_columns = enc.columns;
  const auto seed = cfg.seed;
  switch (cfg.method) {
    case Method::rf:
      fm.state = learners::fit_random_forest(enc, y, std::get<learners::RandomForestConfig>(cfg.params), seed);
      break;
    case Method::bart: fm.state = learners::fit_bart(enc, y, std::get<learners::BartConfig>(cfg.params), seed); break;
    case Method::xgb:
      fm.state = learners::fit_gradient_boost(enc, y, std::get<learners::GradientBoostConfig>(cfg.params));
      break;
    case Method::pcr: fm.state = learners::fit_pcr(enc, y, std::get<learners::PcrConfig>(cfg.params)); break;
    case Method::svr: fm.state = learners::fit_svr(enc, y, std::get<learners::SvrConfig>(cfg.params)); break;
    case Method::nn:
      fm.state = learners::fit_neural_net(enc, y, std::get<learners::NeuralNetConfig>(cfg.params), seed);
      break;
    case Method::mars: fm.state = learners::fit_mars(enc, y, std::get<learners::MarsConfig>(cfg.params), seed); break;
    case Method::knn: fm.state = learners::fit_knn(enc, y, std::get<learners::KnnConfig>(cfg.params)); break;
    case Method::mean:
      if (y.size() < 1) throw ArgumentError("mean baseline needs at least one row");
      fm.state = MeanModel{y.mean()};
      break;
  }
  return fm;
}

}  // namespace ews

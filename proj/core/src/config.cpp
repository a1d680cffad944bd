#include "dpmhm/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace dpmhm {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const std::string t = trim(s);
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size() || std::isnan(v))
    throw ConfigError("expected a number, got '" + s + "'");
  return v;
}

template <typename Int>
Int parse_int(const std::string& s) {
  Int v = 0;
  const std::string t = trim(s);
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size()) throw ConfigError("expected an integer, got '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError("expected true or false, got '" + s + "'");
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F f, const char* sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += f(v[i]);
  }
  return out;
}

struct Entry {
  std::string name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define DPMHM_DOUBLE(key) \
  Entry{#key, [](const RunConfig& c) { return fmt_double(c.key); }, [](RunConfig& c, const std::string& v) { c.key = parse_double(v); }}
#define DPMHM_INT(key) \
  Entry{#key, [](const RunConfig& c) { return std::to_string(c.key); }, [](RunConfig& c, const std::string& v) { c.key = parse_int<decltype(c.key)>(v); }}
#define DPMHM_BOOL(key) \
  Entry{#key, [](const RunConfig& c) { return std::string(c.key ? "true" : "false"); }, [](RunConfig& c, const std::string& v) { c.key = parse_bool(v); }}

template <typename E>
Entry enum_entry(std::string name, E RunConfig::*field, std::vector<std::pair<E, std::string>> names) {
  return Entry{name,
               [field, names](const RunConfig& c) {
                 for (const auto& [e, n] : names)
                   if (c.*field == e) return n;
                 return names.front().second;
               },
               [field, names, name](RunConfig& c, const std::string& v) {
                 for (const auto& [e, n] : names)
                   if (n == v) {
                     c.*field = e;
                     return;
                   }
                 throw ConfigError("invalid value '" + v + "' for " + name);
               }};
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t = {
        enum_entry("mode", &RunConfig::mode,
                   {{EstimatorMode::Dpmhm, "dpmhm"}, {EstimatorMode::MhmThreshold, "mhm_threshold"}, {EstimatorMode::SingleUkf, "single_ukf"}}),
        DPMHM_INT(run_seed),
        DPMHM_INT(submap_length),
        DPMHM_INT(max_branches),
        DPMHM_DOUBLE(plausibility_gap),
        DPMHM_DOUBLE(nn_gate_distance),
        DPMHM_BOOL(fit_fp_rate),
        DPMHM_DOUBLE(fusion_min_support),
        DPMHM_INT(num_classes),
        DPMHM_DOUBLE(meas_sigma2),
        DPMHM_DOUBLE(trans_cov_var),
        Entry{"dirac_classes", [](const RunConfig& c) { return join(c.dirac_classes, [](int v) { return std::to_string(v); }); },
              [](RunConfig& c, const std::string& v) {
                c.dirac_classes.clear();
                for (const auto& p : split(v, ',')) c.dirac_classes.push_back(parse_int<int>(p));
              }},
        Entry{"class_prior", [](const RunConfig& c) { return join(c.class_prior, fmt_double); },
              [](RunConfig& c, const std::string& v) {
                c.class_prior.clear();
                for (const auto& p : split(v, ',')) c.class_prior.push_back(parse_double(p));
              }},
        DPMHM_DOUBLE(dirichlet_alpha),
        DPMHM_DOUBLE(fp_rate),
        DPMHM_DOUBLE(map_volume),
        DPMHM_DOUBLE(lambda_new),
        DPMHM_DOUBLE(lambda_fp),
        DPMHM_DOUBLE(prior_volume),
        DPMHM_DOUBLE(fp_scale),
        DPMHM_DOUBLE(gate_chi2),
        enum_entry("dp_weight_mode", &RunConfig::dp_weight_mode, {{DpWeightMode::Exp, "exp"}, {DpWeightMode::Linear, "linear"}}),
        DPMHM_DOUBLE(ess_fraction),
        DPMHM_DOUBLE(kld_epsilon),
        DPMHM_DOUBLE(kld_delta),
        DPMHM_INT(max_hypotheses),
        DPMHM_BOOL(kld_cube_bracket),
        DPMHM_DOUBLE(ukf_alpha),
        DPMHM_DOUBLE(ukf_beta),
        DPMHM_DOUBLE(ukf_kappa),
        enum_entry("tfidf_doc_unit", &RunConfig::tfidf_doc_unit, {{TfidfDocUnit::Submap, "submap"}, {TfidfDocUnit::Scene, "scene"}}),
        DPMHM_INT(gate_min_landmarks),
        DPMHM_DOUBLE(gate_min_tfidf),
        DPMHM_BOOL(gate_use_tree),
        DPMHM_INT(gate_tree_max_depth),
        DPMHM_INT(gate_tree_min_leaf),
        DPMHM_DOUBLE(tau_jsd),
        DPMHM_DOUBLE(r_l2),
        DPMHM_INT(exclusion_window),
        DPMHM_DOUBLE(tau_verify),
        DPMHM_DOUBLE(class_penalty),
        DPMHM_DOUBLE(dist_norm),
        DPMHM_DOUBLE(edge_radius),
        enum_entry("scene_term_mode", &RunConfig::scene_term_mode,
                   {{SceneTermMode::AsPrinted, "as_printed"}, {SceneTermMode::DistanceWeighted, "distance_weighted"}}),
        DPMHM_INT(ransac_iterations),
        DPMHM_DOUBLE(ransac_inlier_tol),
        DPMHM_INT(ransac_min_inliers),
        DPMHM_DOUBLE(bayes_prior),
        DPMHM_DOUBLE(bayes_p_stay_lc),
        DPMHM_DOUBLE(bayes_p_stay_no_lc),
        DPMHM_DOUBLE(bayes_p_pos_given_lc),
        DPMHM_DOUBLE(bayes_p_pos_given_no_lc),
        DPMHM_DOUBLE(tau_bayes),
        DPMHM_INT(max_closures_per_submap),
        DPMHM_DOUBLE(cauchy_c),
        DPMHM_DOUBLE(odom_sigma_t),
        DPMHM_DOUBLE(odom_sigma_r),
        DPMHM_DOUBLE(odom_sigma_z),
        DPMHM_DOUBLE(prior_sigma),
        DPMHM_DOUBLE(loop_sigma_t),
        DPMHM_DOUBLE(loop_sigma_r),
        DPMHM_INT(optimizer_max_iters),
        DPMHM_DOUBLE(grad_tol),
        DPMHM_DOUBLE(lambda_init),
        DPMHM_INT(world_seed),
        DPMHM_DOUBLE(arena_size),
        Entry{"landmarks_per_class",
              [](const RunConfig& c) { return join(c.landmarks_per_class, [](int v) { return std::to_string(v); }); },
              [](RunConfig& c, const std::string& v) {
                c.landmarks_per_class.clear();
                for (const auto& p : split(v, ',')) c.landmarks_per_class.push_back(parse_int<int>(p));
              }},
        Entry{"trajectory", [](const RunConfig& c) { return to_string(c.trajectory); },
              [](RunConfig& c, const std::string& v) {
                try {
                  c.trajectory = parse_trajectory_shape(v);
                } catch (const ParameterError& e) {
                  throw ConfigError(e.what());
                }
              }},
        DPMHM_INT(steps),
        DPMHM_DOUBLE(step_length),
        DPMHM_DOUBLE(min_separation),
        DPMHM_DOUBLE(max_height),
        DPMHM_DOUBLE(dt),
        DPMHM_DOUBLE(det_range),
        DPMHM_DOUBLE(det_fov_deg),
        DPMHM_DOUBLE(det_p_fn),
        DPMHM_DOUBLE(det_lambda_fp),
        // Rows separated by ';', entries by ','.
        Entry{"det_confusion",
              [](const RunConfig& c) {
                return join(c.det_confusion, [](const std::vector<double>& row) { return join(row, fmt_double); }, ";");
              },
              [](RunConfig& c, const std::string& v) {
                c.det_confusion.clear();
                for (const auto& row : split(v, ';')) {
                  std::vector<double> r;
                  for (const auto& p : split(row, ',')) r.push_back(parse_double(p));
                  c.det_confusion.push_back(std::move(r));
                }
              }},
        DPMHM_DOUBLE(det_sigma2),
        DPMHM_DOUBLE(odo_sigma_t),
        DPMHM_DOUBLE(odo_sigma_r),
        DPMHM_DOUBLE(odo_yaw_bias),
    };
    return t;
  }();
  return table;
}

#undef DPMHM_DOUBLE
#undef DPMHM_INT
#undef DPMHM_BOOL

}  // namespace

std::string to_string(EstimatorMode m) {
  switch (m) {
    case EstimatorMode::Dpmhm: return "dpmhm";
    case EstimatorMode::MhmThreshold: return "mhm_threshold";
    case EstimatorMode::SingleUkf: return "single_ukf";
  }
  return "dpmhm";
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& e : entries()) out.push_back(e.name);
  return out;
}

RunConfig parse_config(const std::string& text) {
  std::map<std::string, const Entry*> by_name;
  for (const auto& e : entries()) by_name[e.name] = &e;
  RunConfig c;
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = by_name.find(key);
    if (it == by_name.end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + "repeated key '" + key + "'");
    try {
      it->second->set(c, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& c) {
  std::string out;
  for (const auto& e : entries()) out += e.name + " = " + e.get(c) + "\n";
  return out;
}

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid parameter: " + what);
  };
  require(submap_length >= 1, "submap_length >= 1");
  require(max_branches >= 1, "max_branches >= 1");
  require(plausibility_gap >= 0.0, "plausibility_gap >= 0");
  require(nn_gate_distance > 0.0, "nn_gate_distance > 0");
  require(fusion_min_support >= 0.0 && fusion_min_support <= 1.0, "fusion_min_support in [0, 1]");
  require(num_classes >= 1, "num_classes >= 1");
  require(meas_sigma2 > 0.0 && trans_cov_var > 0.0, "meas_sigma2 and trans_cov_var > 0");
  for (int d : dirac_classes) require(d >= 0 && d < num_classes, "dirac_classes within [0, num_classes)");
  require(class_prior.empty() || static_cast<int>(class_prior.size()) == num_classes, "class_prior has num_classes entries");
  for (double p : class_prior) require(p > 0.0 && p <= 1.0, "class_prior entries in (0, 1]");
  require(gate_chi2 > 0.0, "gate_chi2 > 0");
  require(ess_fraction > 0.0 && ess_fraction <= 1.0, "ess_fraction in (0, 1]");
  require(kld_epsilon > 0.0 && kld_delta > 0.0 && kld_delta < 1.0, "kld_epsilon > 0 and kld_delta in (0, 1)");
  require(max_hypotheses >= 1, "max_hypotheses >= 1");
  require(ukf_alpha > 0.0 && ukf_alpha <= 1.0, "ukf_alpha in (0, 1]");
  require(gate_tree_max_depth >= 1 && gate_tree_min_leaf >= 1, "gate tree depth and leaf size >= 1");
  require(tau_jsd >= 0.0 && tau_jsd <= std::log(2.0), "tau_jsd in [0, ln 2]");
  require(r_l2 >= 0.0 && exclusion_window >= 0, "r_l2 and exclusion_window >= 0");
  require(class_penalty >= 0.0 && class_penalty <= 1.0, "class_penalty in [0, 1]");
  require(dist_norm > 0.0 && edge_radius > 0.0, "dist_norm and edge_radius > 0");
  require(ransac_iterations >= 1 && ransac_inlier_tol > 0.0 && ransac_min_inliers >= 3, "RANSAC parameters");
  for (double p : {bayes_prior, bayes_p_stay_lc, bayes_p_stay_no_lc, bayes_p_pos_given_lc, bayes_p_pos_given_no_lc, tau_bayes})
    require(p >= 0.0 && p <= 1.0, "Bayes filter probabilities in [0, 1]");
  require(max_closures_per_submap >= 0, "max_closures_per_submap >= 0");
  require(cauchy_c > 0.0, "cauchy_c > 0");
  require(odom_sigma_t > 0.0 && odom_sigma_r > 0.0 && odom_sigma_z > 0.0 && prior_sigma > 0.0 && loop_sigma_t > 0.0 && loop_sigma_r > 0.0,
          "graph sigmas > 0");
  require(optimizer_max_iters >= 0 && grad_tol > 0.0 && lambda_init > 0.0, "optimizer parameters");
  require(static_cast<int>(landmarks_per_class.size()) == num_classes, "landmarks_per_class has num_classes entries");
  require(det_sigma2 >= 0.0, "det_sigma2 >= 0");
  try {
    assoc().validate();
    world().validate();
    detector().validate(num_classes);
    odometry().validate();
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("invalid parameter: ") + e.what());
  }
}

AssocParams RunConfig::assoc() const {
  AssocParams p;
  p.meas_cov = meas_sigma2 * Mat3::Identity();
  p.num_classes = num_classes;
  p.dirac_classes = {dirac_classes.begin(), dirac_classes.end()};
  for (int c = 0; c < num_classes; ++c)
    if (!p.dirac_classes.contains(c)) p.trans_cov_by_class[c] = trans_cov_var * Mat3::Identity();
  for (std::size_t c = 0; c < class_prior.size(); ++c) p.class_prior[static_cast<int>(c)] = class_prior[c];
  p.dirichlet_alpha = dirichlet_alpha;
  p.fp_rate = fp_rate;
  p.map_volume = map_volume;
  p.lambda_new = lambda_new;
  p.lambda_fp = lambda_fp;
  p.prior_volume = prior_volume;
  p.fp_scale = fp_scale;
  p.gate_chi2 = gate_chi2;
  p.dp_weight_mode = dp_weight_mode;
  return p;
}

ResampleParams RunConfig::resample() const {
  ResampleParams p;
  p.ess_fraction = ess_fraction;
  p.kld_epsilon = kld_epsilon;
  p.kld_delta = kld_delta;
  p.max_hypotheses = max_hypotheses;
  p.rng_seed = run_seed;
  p.kld_cube_bracket = kld_cube_bracket;
  return p;
}

UkfParams RunConfig::ukf() const { return {ukf_alpha, ukf_beta, ukf_kappa}; }

GateRule RunConfig::gate_rule() const { return {gate_min_landmarks, gate_min_tfidf}; }

LoopDetectorParams RunConfig::loop_detector() const {
  LoopDetectorParams p;
  p.query = {tau_jsd, r_l2, exclusion_window};
  p.verify = {tau_verify, class_penalty, dist_norm, edge_radius, scene_term_mode};
  p.ransac = {ransac_iterations, ransac_inlier_tol, ransac_min_inliers};
  p.prior = {bayes_prior, bayes_p_stay_lc, bayes_p_stay_no_lc, bayes_p_pos_given_lc, bayes_p_pos_given_no_lc};
  p.tau_bayes = tau_bayes;
  p.max_closures_per_submap = max_closures_per_submap;
  p.seed = run_seed;
  return p;
}

OptimizeParams RunConfig::optimizer() const { return {optimizer_max_iters, grad_tol, lambda_init}; }

WorldSpec RunConfig::world() const {
  WorldSpec w;
  w.seed = world_seed;
  w.arena_size = arena_size;
  w.landmarks_per_class = landmarks_per_class;
  w.shape = trajectory;
  w.steps = steps;
  w.step_length = step_length;
  w.min_separation = min_separation;
  w.max_height = max_height;
  w.dt = dt;
  return w;
}

DetectorSpec RunConfig::detector() const {
  DetectorSpec d;
  d.range = det_range;
  d.fov_deg = det_fov_deg;
  d.p_fn = det_p_fn;
  d.lambda_fp = det_lambda_fp;
  d.confusion = det_confusion;
  d.meas_cov = det_sigma2 * Mat3::Identity();
  return d;
}

OdometrySpec RunConfig::odometry() const { return {odo_sigma_t, odo_sigma_r, odo_yaw_bias}; }

}  // namespace dpmhm

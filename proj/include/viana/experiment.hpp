#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "viana/config.hpp"
#include "viana/expansivity.hpp"
#include "viana/large_deviations.hpp"
#include "viana/specification.hpp"
#include "viana/svg.hpp"

#ifndef VIANA_VERSION
#define VIANA_VERSION "0.1.0"
#endif

namespace viana {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumeric = 3, kExitAcceptance = 4 };

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s{"simulate", "constants", "lyapunov", "hyptimes", "decompose", "pressure",
                                          "gap",      "bowen",     "glue",     "expansivity", "ldp",     "all"};
  return s;
}

// CSV with locale-free, round-trip number formatting.
class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw NumericError("cannot write " + path.string());
    write_row(header);
  }

  template <class... T>
  void row(const T&... v) {
    std::vector<std::string> cells{cell(v)...};
    write_row(cells);
  }

 private:
  static std::string cell(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(bool b) { return b ? "1" : "0"; }
  template <class I>
    requires std::is_integral_v<I>
  static std::string cell(I v) {
    return std::to_string(v);
  }

  void write_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

  std::ofstream out_;
};

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ResolvedConstants {
  double a0 = kNaN;
  double trap_lo = kNaN, trap_hi = kNaN;
  double c0_estimate = kNaN;
  double positive_fraction = kNaN;
  std::vector<double> lambda_c;
  double eps_hat = kNaN;
  double sigma = kNaN;
  double delta = kNaN;
  double b = kNaN;
  double r = kNaN;
  double delta1 = kNaN;
  double nu_hat = kNaN;
  double tau_eps = kNaN;
  int tau = -1;

  Json to_json() const {
    auto num = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
    return Json{{"a0", num(a0)},
                {"trapping_interval", {num(trap_lo), num(trap_hi)}},
                {"c0_estimate", num(c0_estimate)},
                {"lambda_c_positive_fraction", num(positive_fraction)},
                {"eps_hat", num(eps_hat)},
                {"sigma", num(sigma)},
                {"delta", num(delta)},
                {"b", num(b)},
                {"r", num(r)},
                {"delta1", num(delta1)},
                {"nu_hat", num(nu_hat)},
                {"tau_eps", num(tau_eps)},
                {"tau", tau}};
  }
};

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Runner {
 public:
  explicit Runner(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
    default_threads() = cfg_.run.threads;
    const auto violations = validate_config(cfg_);
    if (!violations.empty()) {
      std::string msg = "invalid configuration:";
      for (const auto& v : violations) msg += "\n  " + v.key + ": " + v.message + " (" + v.reason + ")";
      throw ConfigError(msg);
    }
    const double a0 = std::isnan(cfg_.system.a0) ? find_misiurewicz_a0(4, 1) : cfg_.system.a0;
    sp_ = make_params(cfg_.system.d, a0, cfg_.system.alpha,
                      cfg_.system.mode == "perturbed" ? Mode::perturbed : Mode::skew, cfg_.system.perturbation,
                      cfg_.run.seed);
    root_ = cfg_.run.out_dir;
  }

  const SystemParams& params() const { return sp_; }
  const ExperimentConfig& config() const { return cfg_; }
  const std::vector<Check>& checks() const { return checks_; }

  // Runs one subcommand and writes the manifest; returns the exit code.
  int run(const std::string& cmd) {
    const auto started = utc_now();
    fs::create_directories(root_);
    int code = kExitOk;
    std::string error;
    try {
      dispatch(cmd);
      for (const auto& c : checks_) code = c.pass ? code : kExitAcceptance;
    } catch (const ConfigError& e) {
      code = kExitConfig;
      error = e.what();
    } catch (const ContractError& e) {
      code = kExitConfig;
      error = e.what();
    } catch (const NumericError& e) {
      code = kExitNumeric;
      error = e.what();
    }
    write_manifest(cmd, started, code, error);
    if (!error.empty()) last_error_ = error;
    return code;
  }

  const std::string& last_error() const { return last_error_; }

  const ResolvedConstants& constants() {
    if (!constants_) constants_ = resolve_constants();
    return *constants_;
  }

 private:
  std::uint64_t seed(const char* tag, std::uint64_t i = 0) const { return derive_seed(cfg_.run.seed, tag, i); }

  fs::path dir(const std::string& name) {
    const fs::path p = root_ / name;
    fs::create_directories(p);
    return p;
  }

  fs::path out(const std::string& sub, const std::string& file) {
    const fs::path p = dir(sub) / file;
    outputs_.push_back(fs::relative(p, root_).generic_string());
    return p;
  }

  void write_json(const fs::path& p, const Json& j) {
    std::ofstream f(p);
    if (!f) throw NumericError("cannot write " + p.string());
    f << j.dump(2) << '\n';
  }

  void check(std::string name, bool pass, std::string detail) {
    checks_.push_back({std::move(name), pass, std::move(detail)});
  }

  static std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
  }

  void dispatch(const std::string& cmd) {
    if (cmd == "simulate") return simulate();
    if (cmd == "constants") return run_constants();
    if (cmd == "lyapunov") return lyapunov();
    if (cmd == "hyptimes") return hyptimes();
    if (cmd == "decompose") return decompose_cmd();
    if (cmd == "pressure") return pressure();
    if (cmd == "gap") return gap();
    if (cmd == "bowen") return bowen();
    if (cmd == "glue") return glue_cmd();
    if (cmd == "expansivity") return expansivity();
    if (cmd == "ldp") return ldp();
    if (cmd == "all") {
      for (const auto& c : subcommands()) {
        if (c != "all") dispatch(c);
      }
      return;
    }
    throw ConfigError("unknown subcommand '" + cmd + "'");
  }

  HypParams hyp() {
    const auto& k = constants();
    return {k.sigma, k.delta, k.b};
  }

  ResolvedConstants resolve_constants() {
    const auto& c = cfg_.constants;
    ResolvedConstants k;
    k.a0 = sp_.a0;
    k.trap_lo = sp_.trap_lo;
    k.trap_hi = sp_.trap_hi;
    const auto c0 = calibrate_c0(sp_, c.c0_seeds, c.lyapunov_N, seed("c0"));
    k.c0_estimate = c0.c0;
    k.positive_fraction = c0.positive_fraction;
    k.lambda_c = c0.lambda_c;
    const auto lu = lyapunov_batch(sp_, Exponent::unstable, cfg_.lyapunov.seeds, c.lyapunov_N, seed("eps_hat"));
    k.eps_hat = eps_hat_from(sp_, lu);
    k.sigma = std::isnan(c.sigma) ? std::exp(-k.c0_estimate / 6.0) : c.sigma;
    k.delta = select_delta(sp_, c.gamma, c.recurrence_N, seed("delta"));
    k.b = c.b;
    k.r = std::isnan(c.r) ? 0.5 * k.c0_estimate : c.r;
    if (k.r > 0.5 * k.c0_estimate + 1e-15) {
      throw ConfigError("constants.r: exceeds c0_estimate / 2 = " + fmt(0.5 * k.c0_estimate) +
                        " (pressure gap of S needs r <= c0 / 2)");
    }
    const HypParams hp{k.sigma, k.delta, k.b};
    std::vector<double> dens;
    for (std::size_t i = 0; i < c.density_orbits; ++i) {
      dens.push_back(sample_hyperbolic(sp_, hp, c.density_N, seed("density", i)).rep.density);
    }
    k.nu_hat = density_check(dens, 0.0).nu_hat;
    k.delta1 = calibrate_delta1(sp_, hp, c.delta1_orbits, c.delta1_N, 5, c.delta1_pairs, seed("delta1"));
    k.tau_eps = c.tau_eps;
    if (!sp_.perturbed()) {
      Rng g = make_rng(seed("tau_centers"), "centers");
      std::vector<Point> centers;
      for (std::size_t i = 0; i < c.tau_centers; ++i) centers.push_back(srb_sample(sp_, g).point());
      k.tau = mixing_time(sp_, c.tau_eps, c.tau_eps, centers, 30, 20000, seed("tau")).tau;
    }
    sp_.constants.c0_estimate = k.c0_estimate;
    sp_.constants.eps_hat = k.eps_hat;
    sp_.constants.sigma = k.sigma;
    sp_.constants.delta = k.delta;
    sp_.constants.b = k.b;
    sp_.constants.r = k.r;
    sp_.constants.delta1 = k.delta1;
    sp_.constants.nu_hat = k.nu_hat;
    return k;
  }

  void simulate() {
    const auto& c = cfg_.simulate;
    CsvWriter w(out("simulate", "orbits.csv"), {"orbit", "k", "theta", "t"});
    PlotSeries cloud{"orbit 0", {}, {}, true};
    for (std::size_t i = 0; i < c.orbits; ++i) {
      Rng g = make_rng(seed("simulate", i), "start");
      TrackedPoint x = srb_sample(sp_, g);
      for (std::size_t k = 0; k < c.N; ++k) {
        w.row(i, k, x.theta, x.t);
        if (i == 0 && k < 5000) {
          cloud.x.push_back(x.theta);
          cloud.y.push_back(x.t);
        }
        step(sp_, x);
      }
    }
    write_svg_plot(out("simulate", "orbit_cloud.svg").string(), "Orbit cloud", "theta", "t", {cloud});
  }

  void run_constants() {
    const auto& k = constants();
    CsvWriter w(out("constants", "constants.csv"), {"name", "value"});
    const Json kj = k.to_json();
    for (const auto& [name, v] : kj.items()) {
      if (v.is_array()) {
        w.row(name + "_lo", v[0].is_null() ? kNaN : v[0].get<double>());
        w.row(name + "_hi", v[1].is_null() ? kNaN : v[1].get<double>());
      } else {
        w.row(name, v.is_null() ? kNaN : v.get<double>());
      }
    }
    write_json(out("constants", "constants.json"), kj);
    const auto adm = admissible(sp_, cos_potential(cfg_.bowen.amplitude));
    check("constants: c0_estimate positive", k.c0_estimate > 0.0, "c0 = " + fmt(k.c0_estimate));
    check("constants: admissibility threshold positive", adm.threshold > 0.0, "threshold = " + fmt(adm.threshold));
  }

  void lyapunov() {
    const auto& k = constants();
    const auto& c = cfg_.lyapunov;
    const auto lu = lyapunov_batch(sp_, Exponent::unstable, c.seeds, c.N, seed("lyapunov"));
    CsvWriter w(out("lyapunov", "lyapunov.csv"),
                {"exponent", "seed", "value", "error_bar", "half_drift", "batch_stderr", "skipped"});
    PlotSeries su{"lambda_u", {}, {}, true}, sc{"lambda_c", {}, {}, true};
    const double target = std::log(static_cast<double>(sp_.d));
    bool in_band = true;
    for (std::size_t i = 0; i < lu.size(); ++i) {
      w.row("u", i, lu[i].value, lu[i].error_bar, lu[i].half_drift, lu[i].batch_stderr, lu[i].skipped);
      in_band = in_band && std::abs(lu[i].value - target) <= 0.5;
      su.x.push_back(static_cast<double>(i));
      su.y.push_back(lu[i].value);
    }
    for (std::size_t i = 0; i < k.lambda_c.size(); ++i) {
      w.row("c", i, k.lambda_c[i], kNaN, kNaN, kNaN, 0);
      sc.x.push_back(static_cast<double>(i));
      sc.y.push_back(k.lambda_c[i]);
    }
    write_svg_plot(out("lyapunov", "exponents.svg").string(), "Lyapunov exponents", "seed", "exponent", {su, sc});
    check("lyapunov: lambda_u within log(d) +- 0.5", in_band, "log d = " + fmt(target));
    check("lyapunov: pairwise agreement within 3 error bars", pairwise_agree(lu), std::to_string(lu.size()) + " seeds");
    check("lyapunov: lambda_c > 0 on >= 99% of seeds", k.positive_fraction >= 0.99,
          "fraction = " + fmt(k.positive_fraction));
  }

  void hyptimes() {
    const auto& k = constants();
    const auto& c = cfg_.hyptimes;
    const HypParams hp = hyp();
    std::vector<HypSample> samples;
    CsvWriter w(out("hyptimes", "hyptimes.csv"), {"orbit", "N", "count", "density", "first", "last"});
    std::vector<double> dens;
    for (std::size_t i = 0; i < c.orbits; ++i) {
      samples.push_back(sample_hyperbolic(sp_, hp, c.N, seed("hyptimes", i)));
      const auto& r = samples.back().rep;
      dens.push_back(r.density);
      w.row(i, c.N, r.times.size(), r.density, r.times.empty() ? 0 : r.times.front(),
            r.times.empty() ? 0 : r.times.back());
    }
    const double nu_hat = density_check(dens, 0.0).nu_hat;
    CsvWriter cw(out("hyptimes", "contraction.csv"), {"orbit", "n", "tested", "skipped", "violations", "worst_ratio"});
    std::size_t viol = 0, tested = 0, picked = 0;
    for (std::size_t j = 0; picked < c.times && j < c.N; ++j) {
      for (std::size_t i = 0; i < samples.size() && picked < c.times; ++i) {
        const auto& ts = samples[i].rep.times;
        if (ts.empty()) continue;
        const std::size_t n = ts[(j * 7919) % ts.size()];
        const auto r = contraction_check(sp_, samples[i].seg, n, k.delta1, hp.sigma, c.pairs, seed("contraction", picked));
        cw.row(i, n, r.tested, r.skipped, r.violations, r.worst_ratio);
        viol += r.violations;
        tested += r.tested;
        ++picked;
      }
    }
    PlotSeries s{"N(n): hyperbolic times up to n", {}, {}, false};
    if (!samples.empty()) {
      std::size_t cnt = 0;
      for (std::size_t n : samples.front().rep.times) {
        s.x.push_back(static_cast<double>(n));
        s.y.push_back(static_cast<double>(++cnt));
      }
    }
    write_svg_plot(out("hyptimes", "counting.svg").string(), "Hyperbolic times (orbit 0)", "n", "count", {s});
    check("hyptimes: density nu_hat > 0", nu_hat > 0.0, "nu_hat = " + fmt(nu_hat));
    check("hyptimes: backward contraction has no violations", viol == 0,
          std::to_string(tested) + " pairs at " + std::to_string(picked) + " times");
  }

  void decompose_cmd() {
    const auto& k = constants();
    const auto& c = cfg_.decompose;
    CsvWriter w(out("decompose", "decompose.csv"), {"segment", "n", "p", "g", "s", "g_in_G"});
    Rng g = make_rng(seed("decompose"), "segments");
    bool total = true;
    for (std::size_t i = 0; i < c.segments; ++i) {
      const std::size_t n = 1 + uniform_index(g, c.n_max);
      const auto seg = make_segment(sp_, srb_sample(sp_, g, 200), n);
      const auto d = decompose(seg.psi, n, k.r);
      total = total && d.p + d.g + d.s == n;
      w.row(i, n, d.p, d.g, d.s, in_G(seg.psi, d.g, k.r));
    }
    CsvWriter lw(out("decompose", "lemma_contraction.csv"), {"pair", "n", "worst_ratio", "max_defect", "violation"});
    std::size_t tested = 0, viol = 0;
    Rng h = make_rng(seed("lemma"), "segments");
    for (std::size_t a = 0; tested < c.lemma_pairs && a < 20 * c.lemma_pairs; ++a) {
      auto seg = sample_good_segment(sp_, k.r, c.lemma_length, c.lemma_length, h);
      if (!seg) continue;
      const auto r = backward_contraction_check(sp_, *seg, seg->size(), k.r, cfg_.pressure.eps, cfg_.pressure.eps, 1,
                                                seed("lemma_pair", a));
      if (r.tested == 0) continue;
      lw.row(tested, seg->size(), r.worst_ratio, r.max_defect, r.violations > 0);
      ++tested;
      viol += r.violations;
    }
    check("decompose: p + g + s = n", total, std::to_string(c.segments) + " segments");
    check("decompose: backward contraction on G has no violations", viol == 0 && tested == c.lemma_pairs,
          std::to_string(tested) + " pairs, " + std::to_string(viol) + " violations");
  }

  TreeBudget tree_budget() const {
    TreeBudget b;
    b.eps = cfg_.pressure.eps;
    b.n_lo = cfg_.pressure.n_lo;
    b.n_hi = cfg_.pressure.n_hi;
    b.end_points = cfg_.pressure.end_points;
    b.digit_samples = cfg_.pressure.digit_samples;
    b.seed = seed("tree");
    return b;
  }

  static void pressure_rows(CsvWriter& w, const std::string& label, const PressureEstimate& e) {
    for (const auto& r : e.rows) w.row(label, r.n, r.log_sum, r.log_count);
  }

  static PlotSeries pressure_series(const std::string& label, const PressureEstimate& e) {
    PlotSeries s{label + " (slope " + fmt(e.value) + ")", {}, {}, false};
    for (const auto& r : e.rows) {
      s.x.push_back(r.n);
      s.y.push_back(r.log_sum);
    }
    return s;
  }

  void pressure() {
    const auto b = tree_budget();
    auto base = b;
    base.base_only = true;
    const auto pb = pressure_estimate(sp_, constant_potential(0.0), PathFilter{}, base);
    const auto p0 = pressure_estimate(sp_, constant_potential(0.0), PathFilter{}, b);
    const auto p1 = pressure_estimate(sp_, constant_potential(1.0), PathFilter{}, b);
    CsvWriter w(out("pressure", "pressure_rows.csv"), {"estimate", "n", "log_sum", "log_count"});
    pressure_rows(w, "base_only", pb);
    pressure_rows(w, "all_phi0", p0);
    pressure_rows(w, "all_phi1", p1);
    CsvWriter s(out("pressure", "pressure.csv"), {"estimate", "value", "residual", "eps"});
    s.row("base_only", pb.value, pb.residual, pb.eps);
    s.row("all_phi0", p0.value, p0.residual, p0.eps);
    s.row("all_phi1", p1.value, p1.residual, p1.eps);
    write_svg_plot(out("pressure", "pressure_fit.svg").string(), "log Lambda_n", "n", "log sum",
                   {pressure_series("base only", pb), pressure_series("all, phi=0", p0), pressure_series("all, phi=1", p1)});
    const double logd = std::log(static_cast<double>(sp_.d));
    check("pressure: base-only entropy within 5% of log d", std::abs(pb.value - logd) <= 0.05 * logd,
          "estimate = " + fmt(pb.value));
    check("pressure: constant shift exact to 1e-12", std::abs(p1.value - p0.value - 1.0) <= 1e-12,
          "shift = " + fmt(p1.value - p0.value));
  }

  void gap() {
    const auto& k = constants();
    const auto b = tree_budget();
    const auto g1 = pressure_gap_S(sp_, constant_potential(0.0), k.r, b);
    const auto g2 = pressure_gap_S(sp_, constant_potential(0.0), k.r, b.doubled());
    CsvWriter w(out("gap", "gap_rows.csv"), {"budget", "collection", "n", "log_sum", "log_count"});
    pressure_rows(w, "base", g1.all);
    pressure_rows(w, "base", g1.bad);
    CsvWriter w2(out("gap", "gap.csv"), {"budget", "p_all", "residual_all", "p_s", "residual_s", "gap"});
    w2.row("base", g1.p_all, g1.residual_all, g1.p_s, g1.residual_s, g1.gap);
    w2.row("doubled", g2.p_all, g2.residual_all, g2.p_s, g2.residual_s, g2.gap);
    write_svg_plot(out("gap", "gap_fit.svg").string(), "Pressure of ALL and S", "n", "log sum",
                   {pressure_series("ALL", g1.all), pressure_series("S", g1.bad)});
    check("gap: P(ALL) - P(S) > 0", g1.gap > 0.0, "gap = " + fmt(g1.gap));
    check("gap: sign stable under doubled budget", (g1.gap > 0.0) == (g2.gap > 0.0), "doubled gap = " + fmt(g2.gap));
    check("gap: fit residuals < 0.1", g1.residual_all < 0.1 && (g1.s_empty || g1.residual_s < 0.1),
          "residual ALL = " + fmt(g1.residual_all) + ", S = " + fmt(g1.residual_s));
  }

  void bowen() {
    const auto& k = constants();
    const auto& c = cfg_.bowen;
    const auto phi = cos_potential(c.amplitude);
    CsvWriter w(out("bowen", "bowen.csv"), {"n_max", "eps", "segments", "companions", "empirical_sup", "analytic_bound"});
    bool ok = true;
    PlotSeries s{"empirical sup", {}, {}, false}, bnd{"analytic bound", {}, {}, false};
    std::vector<std::size_t> ns;
    for (std::size_t n : {10u, 20u, 40u, 80u}) {
      if (n < c.n_max) ns.push_back(n);
    }
    ns.push_back(c.n_max);
    for (std::size_t n : ns) {
      const auto r = bowen_constant_estimate(sp_, phi, k.r, c.eps, c.segments, n, c.companions, seed("bowen", n));
      w.row(n, c.eps, r.segments, r.companions, r.empirical_sup, r.analytic_bound);
      ok = ok && r.ok;
      s.x.push_back(static_cast<double>(n));
      s.y.push_back(r.empirical_sup);
      bnd.x.push_back(static_cast<double>(n));
      bnd.y.push_back(r.analytic_bound);
    }
    write_svg_plot(out("bowen", "bowen.svg").string(), "Bowen constant on G", "n_max", "sup |S_n phi(x) - S_n phi(y)|",
                   {s, bnd});
    check("bowen: empirical constant below analytic bound", ok, std::to_string(ns.size()) + " segment lengths");
  }

  void glue_cmd() {
    const auto& k = constants();
    const auto& c = cfg_.glue;
    CsvWriter w(out("glue", "glue.csv"), {"pair", "n1", "n2", "status", "gap", "max_deviation", "length"});
    std::size_t verify_fail = 0, over_tau = 0, ok = 0;
    for (std::size_t i = 0; i < c.pairs; ++i) {
      Rng g = make_rng(seed("glue", i), "segments");
      auto s1 = sample_good_segment(sp_, k.r, c.max_length, 1, g);
      auto s2 = sample_good_segment(sp_, k.r, c.max_length, 1, g);
      if (!s1 || !s2) throw NumericError("glue: no G-segment found");
      const std::vector<GlueSegment> segs{{s1->start, s1->size()}, {s2->start, s2->size()}};
      const auto r = glue(sp_, segs, c.eps, c.max_gap);
      const int gp = r.gaps.empty() ? -1 : r.gaps.front();
      w.row(i, s1->size(), s2->size(), to_string(r.status), gp, r.shadow.max_deviation, r.length);
      verify_fail += r.status == GlueStatus::verification_failed;
      ok += r.status == GlueStatus::success;
      if (r.status == GlueStatus::success && k.tau >= 0 && gp > k.tau) ++over_tau;
    }
    check("glue: no verification failures", verify_fail == 0,
          std::to_string(ok) + "/" + std::to_string(c.pairs) + " glued");
    check("glue: gaps within tau(eps)", over_tau == 0 && k.tau >= 0, "tau = " + std::to_string(k.tau));
  }

  void expansivity() {
    const auto& k = constants();
    const auto& c = cfg_.expansivity;
    CsvWriter nw(out("expansivity", "nonexpansive.csv"), {"eps", "N", "found", "initial_dist", "max_dist", "merge_step"});
    bool all_found = true;
    for (std::size_t i = 0; i < c.eps_list.size(); ++i) {
      const double e = c.eps_list[i];
      const auto r = nonexpansive_search(sp_, e, c.N, 100, seed("nonexpansive", i));
      const auto* p = r.found() ? &r.pairs.front() : nullptr;
      nw.row(e, c.N, r.found(), p ? p->initial_dist : kNaN, p ? p->max_dist : r.best_near_miss, p ? p->merge_step : 0);
      all_found = all_found && r.found();
    }
    const double eps = 0.5 * k.delta1;
    const HypParams hp = hyp();
    CsvWriter gw(out("expansivity", "gamma.csv"),
                 {"seed", "eps", "N", "companion_count", "last_survival_step", "lambda_c_proxy", "member", "collapsed",
                  "fold_companions"});
    std::vector<GammaDecay> reps(c.seeds);
    parallel_for(c.seeds, [&](std::size_t i) {
      Rng g = make_rng(seed("gamma_seed", i), "lebesgue");
      const auto x = random_tracked(sp_, g);
      reps[i] = gamma_decay_at_hyperbolic_times(sp_, x, eps, c.N, hp, c.times, c.companions, seed("gamma", i));
    });
    std::size_t collapsed = 0;
    for (std::size_t i = 0; i < c.seeds; ++i) {
      const auto& r = reps[i];
      std::size_t last = 0;
      for (std::size_t j = 0; j < r.times.size(); ++j) {
        if (r.diameters[j] >= kDistinctFloor) last = r.times[j];
      }
      gw.row(i, eps, c.N, r.companions, last, r.lambda_c_proxy, r.member, r.collapsed, r.fold_companions);
      collapsed += r.collapsed;
    }
    if (!reps.empty() && !reps.front().times.empty()) {
      PlotSeries d{"companion diameter", {}, {}, false}, b{"sigma^(n/2) eps", {}, {}, false};
      for (std::size_t j = 0; j < reps.front().times.size(); ++j) {
        const double n = static_cast<double>(reps.front().times[j]);
        d.x.push_back(n);
        d.y.push_back(std::log10(std::max(reps.front().diameters[j], 1e-300)));
        b.x.push_back(n);
        b.y.push_back(std::log10(std::max(reps.front().bounds[j], 1e-300)));
      }
      write_svg_plot(out("expansivity", "gamma_decay.svg").string(), "Gamma decay at hyperbolic times (seed 0)", "n",
                     "log10 distance", {d, b});
    }
    const double frac = c.seeds ? static_cast<double>(collapsed) / static_cast<double>(c.seeds) : 0.0;
    if (!sp_.perturbed()) {
      check("expansivity: symmetric pairs certify NE(eps) at every eps", all_found,
            std::to_string(c.eps_list.size()) + " scales");
    }
    check("expansivity: Gamma collapses on >= 95% of seeds", frac >= 0.95, "fraction = " + fmt(frac));
  }

  void ldp() {
    LdpBudget b;
    b.seeds = cfg_.ldp.seeds;
    b.n_grid.clear();
    for (double n : cfg_.ldp.n_grid) b.n_grid.push_back(static_cast<std::size_t>(n));
    b.tree = tree_budget();
    const auto scenarios = default_ldp_scenarios(sp_, b, seed("ldp"), cfg_.ldp.psi_floor);
    CsvWriter pw(out("ldp", "probabilities.csv"), {"scenario", "attempt", "n", "hits", "seeds", "p", "bound_only"});
    CsvWriter cw(out("ldp", "candidates.csv"),
                 {"scenario", "attempt", "candidate", "mean", "entropy", "integral", "value", "in_set"});
    Json report = Json::array();
    std::vector<PlotSeries> curves;
    for (const auto& sc : scenarios) {
      const auto r = ldp_check(sp_, sc, cfg_.ldp.tolerance);
      Json jr{{"scenario", sc.name},
              {"constraint", sc.constraint.description},
              {"interval", {nullptr, sc.constraint.slabs.front().hi}},
              {"tolerance", r.tolerance},
              {"used_doubled_budget", r.used_doubled},
              {"verdict", r.pass ? "pass" : "FAIL"},
              {"attempts", Json::array()}};
      for (const auto* a : {&r.first, &r.doubled}) {
        if (a->probabilities.empty()) continue;
        const std::string label = a == &r.first ? "base" : "doubled";
        PlotSeries s{sc.name + " (" + label + ")", {}, {}, false};
        for (const auto& d : a->probabilities) {
          pw.row(sc.name, label, d.n, d.hits, d.seeds, d.p, d.bound_only);
          s.x.push_back(static_cast<double>(d.n));
          s.y.push_back(std::log(d.p));
        }
        curves.push_back(s);
        for (const auto& cnd : a->bound.table) {
          cw.row(sc.name, label, cnd.name, cnd.means.front(), cnd.entropy, cnd.integral, cnd.value, cnd.in_set);
        }
        jr["attempts"].push_back({{"budget", label},
                                  {"n_grid", b.n_grid},
                                  {"fitted_rate", a->fit.rate},
                                  {"fit_residual", a->fit.residual},
                                  {"rate_bound", std::isfinite(a->bound.bound) ? Json(a->bound.bound) : Json(nullptr)},
                                  {"best_candidate", a->bound.best},
                                  {"p_top", a->bound.p_top},
                                  {"pass", a->pass}});
      }
      report.push_back(jr);
      check("ldp: " + sc.name, r.pass,
            "rate = " + fmt(r.final().fit.rate) + ", bound = " + fmt(r.final().bound.bound));
    }
    write_json(out("ldp", "ldp_report.json"), report);
    write_svg_plot(out("ldp", "decay.svg").string(), "Deviation probabilities", "n", "log p", curves);
  }

  void write_manifest(const std::string& cmd, const std::string& started, int code, const std::string& error) {
    Json cfg = Json::object();
    for (const auto& k : config_schema()) cfg[k.path] = k.get(cfg_);
    Json j{{"code_version", VIANA_VERSION},
           {"command", cmd},
           {"preset", cfg_.run.preset},
           {"master_seed", cfg_.run.seed},
           {"config", cfg},
           {"config_toml", to_toml(cfg_)},
           {"constants", constants_ ? constants_->to_json() : Json(nullptr)},
           {"started_utc", started},
           {"finished_utc", utc_now()},
           {"exit_status", code},
           {"error", error},
           {"checks", Json::array()},
           {"outputs", outputs_}};
    for (const auto& c : checks_) j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    write_json(root_ / "manifest.json", j);
  }

  ExperimentConfig cfg_;
  SystemParams sp_;
  fs::path root_;
  std::optional<ResolvedConstants> constants_;
  std::vector<Check> checks_;
  std::vector<std::string> outputs_;
  std::string last_error_;
};

// Config stored in a manifest, for replay.
inline ExperimentConfig config_from_manifest(const std::string& path, std::string* command = nullptr) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read manifest '" + path + "'");
  Json j;
  try {
    j = Json::parse(f);
  } catch (const std::exception& e) {
    throw ConfigError("manifest '" + path + "': " + e.what());
  }
  if (!j.contains("config_toml")) throw ConfigError("manifest '" + path + "': missing config_toml");
  const std::string toml = j["config_toml"].get<std::string>();
  ExperimentConfig probe;
  std::istringstream in(toml);
  apply_toml(probe, in, path);
  ExperimentConfig c = preset_config(probe.run.preset);
  std::istringstream in2(toml);
  apply_toml(c, in2, path);
  if (command) *command = j.value("command", "all");
  return c;
}

}  // namespace viana

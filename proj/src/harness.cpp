#include "risloc/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

namespace risloc {

namespace {

constexpr std::uint64_t kScheduleSeedSalt = 0x9e3779b97f4a7c15ull;

void parallel_for(int n, const std::function<void(int)>& fn) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int workers = static_cast<int>(std::min<unsigned>(hw, static_cast<unsigned>(n)));
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

RisSchedule build_trial_schedule(const ScenarioConfig& config, std::mt19937_64& rng) {
  std::vector<Angle2> aoa, target;
  if (config.schedule.base_kind == BaseProfileKind::Directional) {
    for (int r = 0; r < config.num_ris(); ++r) {
      aoa.push_back(config.aoa(r));
      target.push_back(config.true_aod(r));
    }
  }
  return build_schedule(config.num_ris(), config.num_transmissions, config.layout(),
                        config.schedule.base_kind, rng, config.schedule.code_length_override,
                        aoa, target, config.wavelength_m);
}

ChannelEstimate run_estimator(EstimatorKind kind, const Observation& obs,
                              const ScenarioConfig& config, const RisSchedule& schedule,
                              double power_w, const GridSpec& grid,
                              std::optional<double> fixed_cfo) {
  switch (kind) {
    case EstimatorKind::Los:
      return estimate_los(obs, config, schedule, power_w, grid, fixed_cfo);
    case EstimatorKind::NlosMl:
      return estimate_nlos_ml(obs, config, schedule, power_w, grid, fixed_cfo);
    case EstimatorKind::NlosLc:
      return estimate_nlos_lc(obs, config, schedule, power_w, grid, fixed_cfo);
  }
  throw std::logic_error("run_estimator: unknown estimator kind");
}

struct TrialRecord {
  double pos_err2 = 0.0;
  double cfo_err2 = 0.0;
  std::vector<double> az_err2, el_err2;
  double peb2 = 0.0, cfo_bound2 = 0.0;
  std::vector<double> az_bound2, el_bound2;
  bool fix_failed = false;
};

Vec3 anchor_centroid(const ScenarioConfig& config) {
  Vec3 c = Vec3::Zero();
  for (const auto& spec : config.ris) c += spec.position;
  return c / static_cast<double>(config.num_ris());
}

Vec3 pipeline_position(const ChannelEstimate& est, const Observation& obs,
                       const ScenarioConfig& config, const RisSchedule& schedule, double power_w,
                       bool* failed) {
  Vec3 p;
  try {
    p = intersect_lines(bearing_lines(est, config));
  } catch (const std::exception&) {
    *failed = true;
    p = anchor_centroid(config);
  }
  if (config.position_refinement) {
    p = refine_position(obs.y, config, schedule, power_w, p, est.cfo_hz, est.los, config.grid)
            .position;
  }
  return p;
}

void record_errors(TrialRecord& rec, const ChannelEstimate& est, const Vec3& position,
                   const ScenarioConfig& config, double true_cfo_hz) {
  rec.pos_err2 = (position - config.ue_position).squaredNorm();
  const double dcfo = est.cfo_hz - true_cfo_hz;
  rec.cfo_err2 = dcfo * dcfo;
  for (int r = 0; r < config.num_ris(); ++r) {
    const Angle2 truth = config.true_aod(r);
    const double daz = wrap_angle(est.aods[r].az - truth.az);
    const double del = est.aods[r].el - truth.el;
    rec.az_err2.push_back(daz * daz);
    rec.el_err2.push_back(del * del);
  }
}

void record_bounds(TrialRecord& rec, const ScenarioConfig& config, const RisSchedule& schedule,
                   double power_w, const PathGains& gains, bool los, double true_cfo_hz) {
  TruthChannel truth;
  truth.cfo_hz = true_cfo_hz;
  truth.gains = gains;
  if (!los) truth.gains.los.reset();
  truth.los = los;
  const BoundsReport b = bounds_report(fim_channel(config, schedule, power_w, truth),
                                       fim_position(config, schedule, power_w, truth));
  rec.peb2 = b.peb_m * b.peb_m;
  rec.cfo_bound2 = b.cfo_bound_hz * b.cfo_bound_hz;
  for (int r = 0; r < config.num_ris(); ++r) {
    rec.az_bound2.push_back(b.aod_az_bound_rad[r] * b.aod_az_bound_rad[r]);
    rec.el_bound2.push_back(b.aod_el_bound_rad[r] * b.aod_el_bound_rad[r]);
  }
}

double rms(const std::vector<TrialRecord>& recs, double TrialRecord::*field) {
  double acc = 0.0;
  for (const auto& r : recs) acc += r.*field;
  return std::sqrt(acc / recs.size());
}

double rms_at(const std::vector<TrialRecord>& recs, std::vector<double> TrialRecord::*field,
              int idx) {
  double acc = 0.0;
  for (const auto& r : recs) acc += (r.*field)[idx];
  return std::sqrt(acc / recs.size());
}

SweepPoint aggregate(const std::vector<TrialRecord>& recs, const ScenarioConfig& config,
                     const std::string& var, double value) {
  SweepPoint pt;
  pt.sweep_var = var;
  pt.value = value;
  pt.trials = static_cast<int>(recs.size());
  pt.seed = config.seed;
  pt.rmse_pos_m = rms(recs, &TrialRecord::pos_err2);
  pt.crb_pos_m = rms(recs, &TrialRecord::peb2);
  pt.rmse_cfo_hz = rms(recs, &TrialRecord::cfo_err2);
  pt.crb_cfo_hz = rms(recs, &TrialRecord::cfo_bound2);
  const double deg = 180.0 / M_PI;
  for (int r = 0; r < config.num_ris(); ++r) {
    pt.rmse_aod_az_deg.push_back(deg * rms_at(recs, &TrialRecord::az_err2, r));
    pt.crb_aod_az_deg.push_back(deg * rms_at(recs, &TrialRecord::az_bound2, r));
    pt.rmse_aod_el_deg.push_back(deg * rms_at(recs, &TrialRecord::el_err2, r));
    pt.crb_aod_el_deg.push_back(deg * rms_at(recs, &TrialRecord::el_bound2, r));
  }
  for (const auto& r : recs)
    if (r.fix_failed) ++pt.fix_failures;
  return pt;
}

SweepPoint estimation_point(const ScenarioConfig& config, EstimatorKind kind, bool los_present,
                            double power_dbm, const RisSchedule* pinned) {
  const double power_w = dbm_to_watt(power_dbm);
  std::vector<TrialRecord> recs(config.trials);
  parallel_for(config.trials, [&](int t) {
    std::mt19937_64 rng(trial_seed(config.seed, t));
    const RisSchedule local = pinned ? RisSchedule{} : build_trial_schedule(config, rng);
    const RisSchedule& schedule = pinned ? *pinned : local;
    const PathGains gains = fspl_gains(config, rng);
    const Observation obs =
        synthesize(config, schedule, power_w, config.cfo_true_hz, los_present, gains, rng);
    const ChannelEstimate est =
        run_estimator(kind, obs, config, schedule, power_w, config.grid, std::nullopt);
    TrialRecord& rec = recs[t];
    const Vec3 p = pipeline_position(est, obs, config, schedule, power_w, &rec.fix_failed);
    record_errors(rec, est, p, config, config.cfo_true_hz);
    record_bounds(rec, config, schedule, power_w, gains, los_present, config.cfo_true_hz);
  });
  return aggregate(recs, config, "power_dbm", power_dbm);
}

SweepPoint kappa_point(const ScenarioConfig& config, double kappa, double power_dbm) {
  const double power_w = dbm_to_watt(power_dbm);
  const bool los_present = config.estimator == EstimatorKind::Los;
  RicianParams rician{kappa, kappa, kappa};
  std::vector<TrialRecord> recs(config.trials);
  parallel_for(config.trials, [&](int t) {
    std::mt19937_64 rng(trial_seed(config.seed, t));
    const RisSchedule schedule = build_trial_schedule(config, rng);
    const PathGains gains = fspl_gains(config, rng);
    const Observation obs = synthesize_multipath(config, schedule, power_w, config.cfo_true_hz,
                                                 los_present, gains, rician, rng);
    const ChannelEstimate est =
        run_estimator(config.estimator, obs, config, schedule, power_w, config.grid, std::nullopt);
    TrialRecord& rec = recs[t];
    const Vec3 p = pipeline_position(est, obs, config, schedule, power_w, &rec.fix_failed);
    record_errors(rec, est, p, config, config.cfo_true_hz);
    // Bounds of the multipath-free model serve as the reference curve.
    record_bounds(rec, config, schedule, power_w, gains, los_present, config.cfo_true_hz);
  });
  return aggregate(recs, config, "kappa", kappa);
}

SweepPoint cfo_point(const ScenarioConfig& config, double cfo_hz, bool with_cfo_estimation,
                     double power_dbm) {
  const double power_w = dbm_to_watt(power_dbm);
  const bool los_present = config.estimator == EstimatorKind::Los;
  std::vector<TrialRecord> recs(config.trials);
  parallel_for(config.trials, [&](int t) {
    std::mt19937_64 rng(trial_seed(config.seed, t));
    const RisSchedule schedule = build_trial_schedule(config, rng);
    const PathGains gains = fspl_gains(config, rng);
    const Observation obs =
        synthesize(config, schedule, power_w, cfo_hz, los_present, gains, rng);
    const std::optional<double> fixed =
        with_cfo_estimation ? std::nullopt : std::optional<double>(0.0);
    const ChannelEstimate est =
        run_estimator(config.estimator, obs, config, schedule, power_w, config.grid, fixed);
    TrialRecord& rec = recs[t];
    const Vec3 p = pipeline_position(est, obs, config, schedule, power_w, &rec.fix_failed);
    record_errors(rec, est, p, config, cfo_hz);
    record_bounds(rec, config, schedule, power_w, gains, los_present, cfo_hz);
  });
  return aggregate(recs, config, with_cfo_estimation ? "cfo_hz" : "cfo_hz_noest", cfo_hz);
}

SweepPoint detect_point(const ScenarioConfig& config, double power_dbm, double threshold) {
  const double power_w = dbm_to_watt(power_dbm);
  const int trials = config.trials;
  std::vector<int> false_alarms(trials, 0), detections(trials, 0);
  std::vector<TrialRecord> recs(trials);
  parallel_for(trials, [&](int t) {
    // Blocked-path data: count false alarms.
    {
      std::mt19937_64 rng(trial_seed(config.seed, t));
      const RisSchedule schedule = build_trial_schedule(config, rng);
      const PathGains gains = fspl_gains(config, rng);
      const Observation obs =
          synthesize(config, schedule, power_w, config.cfo_true_hz, false, gains, rng);
      const DetectionResult det = detect_and_estimate(obs, config, schedule, power_w, config.grid,
                                                      threshold, config.detector.variant);
      false_alarms[t] = det.los_decision ? 1 : 0;
    }
    // Direct-path data: detection probability and downstream accuracy.
    {
      std::mt19937_64 rng(trial_seed(config.seed, t + trials));
      const RisSchedule schedule = build_trial_schedule(config, rng);
      const PathGains gains = fspl_gains(config, rng);
      const Observation obs =
          synthesize(config, schedule, power_w, config.cfo_true_hz, true, gains, rng);
      const DetectionResult det = detect_and_estimate(obs, config, schedule, power_w, config.grid,
                                                      threshold, config.detector.variant);
      detections[t] = det.los_decision ? 1 : 0;
      TrialRecord& rec = recs[t];
      const Vec3 p =
          pipeline_position(det.chosen(), obs, config, schedule, power_w, &rec.fix_failed);
      record_errors(rec, det.chosen(), p, config, config.cfo_true_hz);
      record_bounds(rec, config, schedule, power_w, gains, true, config.cfo_true_hz);
    }
  });
  SweepPoint pt = aggregate(recs, config, "power_dbm", power_dbm);
  double fa = 0.0, pd = 0.0;
  for (int t = 0; t < trials; ++t) {
    fa += false_alarms[t];
    pd += detections[t];
  }
  pt.pfa = fa / trials;
  pt.pd = pd / trials;
  return pt;
}

}  // namespace

Experiment experiment_from_string(const std::string& name) {
  if (name == "los_power") return Experiment::LosPower;
  if (name == "nlos_power_ml") return Experiment::NlosPowerMl;
  if (name == "nlos_power_lc") return Experiment::NlosPowerLc;
  if (name == "detect_power") return Experiment::DetectPower;
  if (name == "kappa") return Experiment::Kappa;
  if (name == "cfo_sensitivity") return Experiment::CfoSensitivity;
  throw std::invalid_argument("unknown experiment '" + name + "'");
}

std::string experiment_name(Experiment e) {
  switch (e) {
    case Experiment::LosPower: return "los_power";
    case Experiment::NlosPowerMl: return "nlos_power_ml";
    case Experiment::NlosPowerLc: return "nlos_power_lc";
    case Experiment::DetectPower: return "detect_power";
    case Experiment::Kappa: return "kappa";
    case Experiment::CfoSensitivity: return "cfo_sensitivity";
  }
  return "unknown";
}

SweepResult run_sweep(const ScenarioConfig& config, Experiment experiment) {
  config.validate();
  SweepResult result;
  result.experiment = experiment;
  result.num_ris = config.num_ris();

  std::optional<RisSchedule> pinned;
  if (config.schedule.fixed_profiles) {
    std::mt19937_64 rng(config.seed ^ kScheduleSeedSalt);
    pinned = build_trial_schedule(config, rng);
  }
  const RisSchedule* pinned_ptr = pinned ? &*pinned : nullptr;

  const auto start_all = std::chrono::steady_clock::now();
  auto timed = [&](const std::function<SweepPoint()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    SweepPoint pt = fn();
    pt.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.points.push_back(std::move(pt));
  };

  switch (experiment) {
    case Experiment::LosPower:
      for (double p : config.power_dbm)
        timed([&] { return estimation_point(config, EstimatorKind::Los, true, p, pinned_ptr); });
      break;
    case Experiment::NlosPowerMl:
      for (double p : config.power_dbm)
        timed([&] { return estimation_point(config, EstimatorKind::NlosMl, false, p, pinned_ptr); });
      break;
    case Experiment::NlosPowerLc:
      for (double p : config.power_dbm)
        timed([&] { return estimation_point(config, EstimatorKind::NlosLc, false, p, pinned_ptr); });
      break;
    case Experiment::DetectPower: {
      double threshold;
      if (config.detector.threshold) {
        threshold = *config.detector.threshold;
      } else {
        const ThresholdCalibration cal = calibrate_threshold(
            config, dbm_to_watt(config.detector.calibration_power_dbm), config.grid,
            config.detector.calibration_trials, config.detector.target_pd,
            config.detector.variant);
        threshold = cal.threshold;
      }
      result.calibrated_threshold = threshold;
      for (double p : config.power_dbm) timed([&] { return detect_point(config, p, threshold); });
      break;
    }
    case Experiment::Kappa:
      for (double kappa : config.rician.kappa_sweep)
        timed([&] { return kappa_point(config, kappa, config.power_dbm.front()); });
      break;
    case Experiment::CfoSensitivity:
      for (double nu : config.cfo_sweep_hz) {
        timed([&] { return cfo_point(config, nu, true, config.power_dbm.front()); });
        timed([&] { return cfo_point(config, nu, false, config.power_dbm.front()); });
      }
      break;
  }
  (void)start_all;
  return result;
}

namespace {

std::string format_value(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

std::string csv_text(const SweepResult& result) {
  std::string out = "sweep_var,value,rmse_pos_m,crb_pos_m,rmse_cfo_hz,crb_cfo_hz";
  for (int r = 1; r <= result.num_ris; ++r) {
    const std::string n = std::to_string(r);
    out += ",rmse_aod" + n + "_az_deg,crb_aod" + n + "_az_deg,rmse_aod" + n + "_el_deg,crb_aod" +
           n + "_el_deg";
  }
  out += ",pfa,pd,trials,seed\n";
  for (const auto& pt : result.points) {
    out += pt.sweep_var;
    out += "," + format_value(pt.value);
    out += "," + format_value(pt.rmse_pos_m);
    out += "," + format_value(pt.crb_pos_m);
    out += "," + format_value(pt.rmse_cfo_hz);
    out += "," + format_value(pt.crb_cfo_hz);
    for (int r = 0; r < result.num_ris; ++r) {
      out += "," + format_value(pt.rmse_aod_az_deg[r]);
      out += "," + format_value(pt.crb_aod_az_deg[r]);
      out += "," + format_value(pt.rmse_aod_el_deg[r]);
      out += "," + format_value(pt.crb_aod_el_deg[r]);
    }
    out += "," + format_value(pt.pfa);
    out += "," + format_value(pt.pd);
    out += "," + std::to_string(pt.trials);
    out += "," + std::to_string(pt.seed);
    out += "\n";
  }
  return out;
}

void emit_csv(const SweepResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_csv: cannot open '" + path + "' for writing");
  out << csv_text(result);
  if (!out) throw std::runtime_error("emit_csv: write to '" + path + "' failed");
}

SimulationDump simulate_once(const ScenarioConfig& config) {
  config.validate();
  SimulationDump dump;
  std::mt19937_64 rng(trial_seed(config.seed, 0));
  const RisSchedule schedule = build_trial_schedule(config, rng);
  const double power_w = dbm_to_watt(config.power_dbm.front());
  const bool los_present = config.estimator == EstimatorKind::Los;
  const PathGains gains = fspl_gains(config, rng);
  dump.observation =
      synthesize(config, schedule, power_w, config.cfo_true_hz, los_present, gains, rng);
  dump.estimate = run_estimator(config.estimator, dump.observation, config, schedule, power_w,
                                config.grid, std::nullopt);
  dump.coarse = coarse_position(dump.estimate, config);
  if (config.position_refinement) {
    dump.refined = refine_position(dump.observation.y, config, schedule, power_w,
                                   dump.coarse.position, dump.estimate.cfo_hz, dump.estimate.los,
                                   config.grid);
    dump.refined_valid = true;
  }
  TruthChannel truth{config.cfo_true_hz, gains, los_present};
  if (!los_present) truth.gains.los.reset();
  dump.bounds = bounds_report(fim_channel(config, schedule, power_w, truth),
                              fim_position(config, schedule, power_w, truth));
  return dump;
}

}  // namespace risloc

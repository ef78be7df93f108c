#include "risloc/estimation.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace risloc {

namespace {

// ---------------------------------------------------------------------------
// Quasi-Newton refinement (BFGS, finite-difference gradients, backtracking)
// ---------------------------------------------------------------------------

Eigen::VectorXd fd_gradient(const Objective& f, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& scales) {
  const int n = static_cast<int>(x.size());
  Eigen::VectorXd g(n);
  for (int i = 0; i < n; ++i) {
    const double h = 1e-4 * scales(i);
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

}  // namespace

RefineResult refine_local(const Objective& raw, const Eigen::VectorXd& x0,
                          const Eigen::VectorXd& scales, double tol, int max_iters) {
  const int n = static_cast<int>(x0.size());
  const double f0 = raw(x0);
  if (!std::isfinite(f0)) throw std::domain_error("refine_local: objective not finite at start");

  // Work on a normalized objective so the descent step sizes do not inherit
  // the physical magnitude of the residual (often ~1e-6 watts or less).
  const double f_ref = std::max(std::abs(f0), 1e-300);
  const auto f = [&](const Eigen::VectorXd& x) { return raw(x) / f_ref; };
  double fx = f0 / f_ref;

  Eigen::VectorXd x = x0;
  Eigen::VectorXd best_x = x0;
  double best_f = fx;

  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);  // scaled coordinates
  Eigen::VectorXd grad = fd_gradient(f, x, scales).cwiseProduct(scales);

  RefineResult result;
  int iter = 0;
  for (; iter < max_iters; ++iter) {
    if (grad.norm() <= tol * (std::abs(fx) + tol)) {
      result.converged = true;
      break;
    }
    Eigen::VectorXd dir = -(hinv * grad);
    if (dir.dot(grad) >= 0.0) {  // lost positive definiteness, reset
      hinv.setIdentity();
      dir = -grad;
    }
    const double dir_norm = dir.norm();
    if (dir_norm > 10.0) dir *= 10.0 / dir_norm;

    // Armijo backtracking in scaled coordinates.
    const double slope = grad.dot(dir);
    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new;
    double f_new = fx;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = x + step * dir.cwiseProduct(scales);
      f_new = f(x_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    const Eigen::VectorXd grad_new = fd_gradient(f, x_new, scales).cwiseProduct(scales);
    const Eigen::VectorXd s = step * dir;
    const Eigen::VectorXd dg = grad_new - grad;
    const double sy = s.dot(dg);
    if (sy > 1e-12 * s.norm() * dg.norm()) {
      const Eigen::VectorXd hy = hinv * dg;
      const double yhy = dg.dot(hy);
      hinv += ((sy + yhy) / (sy * sy)) * (s * s.transpose()) -
              (hy * s.transpose() + s * hy.transpose()) / sy;
    }
    x = x_new;
    fx = f_new;
    grad = grad_new;
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
  }
  result.x = best_x;
  result.value = best_f * f_ref;
  result.iterations = iter;
  return result;
}

// ---------------------------------------------------------------------------
// Model matrix and conditional gains
// ---------------------------------------------------------------------------

Eigen::MatrixXcd model_matrix(double cfo_hz, const std::vector<Angle2>& aods, bool los,
                              const ScenarioConfig& scenario, const RisSchedule& schedule,
                              double power_w) {
  const int m = scenario.num_transmissions;
  const int num_ris = schedule.num_ris();
  const Eigen::VectorXcd b = cfo_vector(cfo_hz, m, scenario.sampling_time_s);
  Eigen::MatrixXcd a(m, num_ris + (los ? 1 : 0));
  int col = 0;
  if (los) a.col(col++) = b;
  for (int r = 1; r <= num_ris; ++r)
    a.col(col++) = ris_response(aods[r - 1], scenario, schedule, r).cwiseProduct(b);
  return std::sqrt(power_w) * a;
}

Eigen::VectorXcd conditional_gains(const Eigen::VectorXcd& y, double cfo_hz,
                                   const std::vector<Angle2>& aods, bool los,
                                   const ScenarioConfig& scenario, const RisSchedule& schedule,
                                   double power_w) {
  const Eigen::MatrixXcd a = model_matrix(cfo_hz, aods, los, scenario, schedule, power_w);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(a);
  if (qr.rank() < a.cols())
    throw std::runtime_error("conditional_gains: rank-deficient model matrix");
  return qr.solve(y);
}

double model_residual(const Eigen::VectorXcd& y, const ChannelEstimate& estimate,
                      const ScenarioConfig& scenario, const RisSchedule& schedule,
                      double power_w) {
  const Eigen::MatrixXcd a =
      model_matrix(estimate.cfo_hz, estimate.aods, estimate.los, scenario, schedule, power_w);
  Eigen::VectorXcd gains(a.cols());
  for (int i = 0; i < a.cols(); ++i) gains(i) = estimate.gains[i];
  return (y - a * gains).squaredNorm();
}

// ---------------------------------------------------------------------------
// CFO search
// ---------------------------------------------------------------------------

namespace {

void cfo_grid_range(const ScenarioConfig& scenario, const GridSpec& grid, double& lo, double& hi) {
  lo = grid.cfo_min_hz;
  hi = grid.cfo_max_hz;
  if (lo == 0.0 && hi == 0.0) {
    hi = scenario.cfo_range_max_hz();
    lo = -hi;
  }
}

double periodogram(const Eigen::VectorXcd& y, double cfo_hz, double sampling_time_s) {
  const double step = -2.0 * M_PI * sampling_time_s * cfo_hz;
  cplx acc(0.0, 0.0);
  for (Eigen::Index m = 0; m < y.size(); ++m) acc += y(m) * std::polar(1.0, step * m);
  return std::norm(acc);
}

}  // namespace

double estimate_cfo_los(const Eigen::VectorXcd& y, const ScenarioConfig& scenario,
                        const GridSpec& grid) {
  double lo, hi;
  cfo_grid_range(scenario, grid, lo, hi);
  const int points = grid.cfo_points;
  const double step = (hi - lo) / points;

  double best_val = -1.0;
  double best_nu = lo;
  for (int g = 0; g < points; ++g) {
    const double nu = lo + g * step;
    const double val = periodogram(y, nu, scenario.sampling_time_s);
    if (val > best_val) {
      best_val = val;
      best_nu = nu;
    }
  }
  if (!grid.refine) return best_nu;

  const auto objective = [&](const Eigen::VectorXd& x) {
    return -periodogram(y, x(0), scenario.sampling_time_s);
  };
  Eigen::VectorXd x0(1), scales(1);
  x0 << best_nu;
  scales << std::max(step, 1.0);
  const RefineResult r =
      refine_local(objective, x0, scales, grid.refine_tol, grid.refine_max_iters);
  return std::clamp(r.x(0), lo, hi);
}

// ---------------------------------------------------------------------------
// AoD search
// ---------------------------------------------------------------------------

namespace {

// Mutex-guarded FFTW plan cache; execution runs on per-thread buffers.
class Fft2dPool {
 public:
  static Fft2dPool& instance() {
    static Fft2dPool pool;
    return pool;
  }

  // out[sy*size + sx] = sum_{i,j} in[i*size + j] exp(+2i pi (sy i + sx j)/size)
  void backward(int size, const cplx* in, cplx* out) {
    fftw_plan plan = get_plan(size);
    thread_local std::map<int, std::pair<fftw_complex*, fftw_complex*>> buffers;
    auto it = buffers.find(size);
    if (it == buffers.end()) {
      fftw_complex* a = fftw_alloc_complex(static_cast<size_t>(size) * size);
      fftw_complex* b = fftw_alloc_complex(static_cast<size_t>(size) * size);
      it = buffers.emplace(size, std::make_pair(a, b)).first;
    }
    std::copy(in, in + static_cast<size_t>(size) * size,
              reinterpret_cast<cplx*>(it->second.first));
    fftw_execute_dft(plan, it->second.first, it->second.second);
    std::copy(reinterpret_cast<cplx*>(it->second.second),
              reinterpret_cast<cplx*>(it->second.second) + static_cast<size_t>(size) * size, out);
  }

 private:
  fftw_plan get_plan(int size) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = plans_.find(size);
    if (it != plans_.end()) return it->second;
    fftw_complex* a = fftw_alloc_complex(static_cast<size_t>(size) * size);
    fftw_complex* b = fftw_alloc_complex(static_cast<size_t>(size) * size);
    fftw_plan plan = fftw_plan_dft_2d(size, size, a, b, FFTW_BACKWARD, FFTW_ESTIMATE);
    fftw_free(a);
    fftw_free(b);
    plans_.emplace(size, plan);
    return plan;
  }

  std::mutex mutex_;
  std::map<int, fftw_plan> plans_;
};

// Effective per-block element weights a(phi_r) .* P_r[:,k], one matrix per RIS.
struct Workspace {
  std::vector<Eigen::MatrixXcd> effective;
};

Workspace make_workspace(const ScenarioConfig& scenario, const RisSchedule& schedule) {
  Workspace ws;
  const RisArrayLayout layout = scenario.layout();
  for (int r = 1; r <= schedule.num_ris(); ++r) {
    const Eigen::VectorXcd a_phi =
        steering_vector(scenario.aoa(r - 1), layout, scenario.wavelength_m);
    ws.effective.push_back(a_phi.asDiagonal() * schedule.base_profiles[r - 1]);
  }
  return ws;
}

Eigen::VectorXcd uncoded_response_ws(const Workspace& ws, const Angle2& theta,
                                     const ScenarioConfig& scenario, int r) {
  const Eigen::VectorXcd a_theta =
      steering_vector(theta, scenario.layout(), scenario.wavelength_m);
  return ws.effective[r - 1].transpose() * a_theta;
}

double aod_objective_ws(const Workspace& ws, const Eigen::VectorXcd& y_r, const Angle2& theta,
                        const ScenarioConfig& scenario, int r) {
  const Eigen::VectorXcd xbar = uncoded_response_ws(ws, theta, scenario, r);
  const double den = xbar.squaredNorm();
  if (den <= 0.0) return 0.0;
  return std::norm(y_r.dot(xbar)) / den;
}

Angle2 angle_from_cosines(double ux, double uy) {
  Angle2 angle;
  const double sin_el = std::min(std::hypot(ux, uy), 1.0);
  angle.az = (ux == 0.0 && uy == 0.0) ? 0.0 : std::atan2(uy, ux);
  angle.el = std::asin(sin_el);
  return angle;
}

// Coarse maximization of |v' a(theta)|^2 over the direction-cosine disk via a
// zero-padded 2-D FFT; valid for element spacing <= lambda / 2. Returns the
// best bin and its antipode: near the disk rim the antipodal response
// aliases to almost full height at half-wavelength spacing, so the caller
// must disambiguate with the exact objective.
std::array<Angle2, 2> fft_coarse_aod(const Eigen::VectorXcd& v, const RisArrayLayout& layout,
                                     double wavelength, int fft_size) {
  const int size = std::max({fft_size, layout.rows, layout.cols});
  std::vector<cplx> in(static_cast<size_t>(size) * size, cplx(0.0, 0.0));
  for (int i = 0; i < layout.rows; ++i)
    for (int j = 0; j < layout.cols; ++j)
      in[static_cast<size_t>(i) * size + j] = v(i * layout.cols + j);
  std::vector<cplx> out(static_cast<size_t>(size) * size);
  Fft2dPool::instance().backward(size, in.data(), out.data());

  const double u_step = wavelength / (size * layout.spacing);
  double best = -1.0;
  double best_ux = 0.0, best_uy = 0.0;
  for (int sy = 0; sy < size; ++sy) {
    const double uy = u_step * (sy < size / 2 ? sy : sy - size);
    for (int sx = 0; sx < size; ++sx) {
      const double ux = u_step * (sx < size / 2 ? sx : sx - size);
      if (ux * ux + uy * uy > 1.0) continue;
      const double val = std::norm(out[static_cast<size_t>(sy) * size + sx]);
      if (val > best) {
        best = val;
        best_ux = ux;
        best_uy = uy;
      }
    }
  }
  return {angle_from_cosines(best_ux, best_uy), angle_from_cosines(-best_ux, -best_uy)};
}

Angle2 grid_coarse_aod(const Workspace& ws, const Eigen::VectorXcd& y_r,
                       const ScenarioConfig& scenario, int r, int points) {
  const int g = std::max(points, 2);
  double best = -1.0;
  Angle2 best_angle{-M_PI + 2.0 * M_PI / g, 0.0};
  for (int i = 0; i < g; ++i) {
    const double el = i * (0.5 * M_PI) / (g - 1);
    for (int j = 0; j < g; ++j) {
      const double az = -M_PI + (j + 1) * 2.0 * M_PI / g;
      const double val = aod_objective_ws(ws, y_r, Angle2{az, el}, scenario, r);
      if (val > best) {
        best = val;
        best_angle = Angle2{az, el};
      }
    }
  }
  return best_angle;
}

double beamwidth(const ScenarioConfig& scenario) {
  const double aperture =
      std::max(scenario.ris_rows, scenario.ris_cols) * scenario.element_spacing_m;
  return scenario.wavelength_m / aperture;
}

AodEstimate estimate_aod_ws(const Workspace& ws, const Eigen::VectorXcd& y_r,
                            const ScenarioConfig& scenario, const RisSchedule& schedule, int r,
                            const GridSpec& grid, double power_w, bool refine) {
  AodEstimate est;
  if (y_r.squaredNorm() <= 0.0) {
    est.degenerate = true;
    est.angle = Angle2{0.0, 0.0};
    return est;
  }

  // Near the rim of the direction-cosine disk the antipodal response aliases
  // to almost the full mainlobe height at half-wavelength spacing, so both
  // the FFT peak and its mirror are kept as candidates.
  std::vector<Angle2> candidates;
  const bool fft_ok = scenario.wavelength_m >= 2.0 * scenario.element_spacing_m;
  if (grid.aod_method == AodSearchMethod::Fft && fft_ok) {
    const Eigen::VectorXcd v = ws.effective[r - 1] * y_r.conjugate();
    const std::array<Angle2, 2> pair =
        fft_coarse_aod(v, scenario.layout(), scenario.wavelength_m, grid.aod_fft_size);
    candidates.assign(pair.begin(), pair.end());
  } else {
    candidates.push_back(grid_coarse_aod(ws, y_r, scenario, r, grid.aod_grid_points));
  }

  double best_val = -1.0;
  for (const Angle2& start : candidates) {
    Angle2 angle = start;
    if (refine && grid.refine) {
      const auto objective = [&](const Eigen::VectorXd& x) {
        return -aod_objective_ws(ws, y_r, Angle2{x(0), x(1)}, scenario, r);
      };
      Eigen::VectorXd x0(2), scales(2);
      x0 << start.az, start.el;
      const double s = std::max(beamwidth(scenario) / 8.0, 1e-5);
      // Elevation sensitivity collapses near grazing (du = cos(el) del).
      scales << s, s / std::clamp(std::cos(start.el), 0.05, 1.0);
      const RefineResult res =
          refine_local(objective, x0, scales, grid.refine_tol, grid.refine_max_iters);
      angle = Angle2{wrap_angle(res.x(0)), res.x(1)};
    }
    const double val = aod_objective_ws(ws, y_r, angle, scenario, r);
    if (val > best_val) {
      best_val = val;
      est.angle = angle;
    }
  }

  const Eigen::VectorXcd xbar = uncoded_response_ws(ws, est.angle, scenario, r);
  const double den = xbar.squaredNorm();
  est.objective = den > 0.0 ? std::norm(y_r.dot(xbar)) / den : 0.0;
  est.gain = den > 0.0 ? xbar.dot(y_r) / (std::sqrt(power_w) * den) : cplx(0.0, 0.0);
  return est;
}

std::vector<Eigen::VectorXcd> decode_at_ws(const Eigen::VectorXcd& y, double cfo_hz,
                                           const ScenarioConfig& scenario,
                                           const RisSchedule& schedule) {
  const Eigen::VectorXcd removed =
      y.cwiseProduct(cfo_vector(-cfo_hz, static_cast<int>(y.size()), scenario.sampling_time_s));
  const Eigen::MatrixXcd reshaped = reshape_observations(removed, schedule.code_length);
  std::vector<Eigen::VectorXcd> streams;
  for (const auto& code : schedule.codes) streams.push_back(decode(reshaped, code));
  return streams;
}

// Single coarse pick plus the exact normalized objective at it; used inside
// the CFO candidate loop where only the angle and its absorbed energy matter.
struct FastAod {
  Angle2 angle;
  double objective = 0.0;
};

FastAod fast_aod_pick(const Workspace& ws, const Eigen::VectorXcd& y_r,
                      const ScenarioConfig& scenario, int r, const GridSpec& grid) {
  FastAod out;
  if (y_r.squaredNorm() <= 0.0) return out;
  const bool fft_ok = scenario.wavelength_m >= 2.0 * scenario.element_spacing_m;
  if (grid.aod_method == AodSearchMethod::Fft && fft_ok) {
    const Eigen::VectorXcd v = ws.effective[r - 1] * y_r.conjugate();
    out.angle = fft_coarse_aod(v, scenario.layout(), scenario.wavelength_m,
                               grid.aod_fft_size)[0];
  } else {
    out.angle = grid_coarse_aod(ws, y_r, scenario, r, grid.aod_grid_points);
  }
  out.objective = aod_objective_ws(ws, y_r, out.angle, scenario, r);
  return out;
}

}  // namespace

double aod_objective(const Eigen::VectorXcd& y_r, const Angle2& theta,
                     const ScenarioConfig& scenario, const RisSchedule& schedule, int r) {
  const Eigen::VectorXcd xbar = uncoded_response(theta, scenario, schedule, r);
  const double den = xbar.squaredNorm();
  if (den <= 0.0) return 0.0;
  return std::norm(y_r.dot(xbar)) / den;
}

AodEstimate estimate_aod_per_ris(const Eigen::VectorXcd& y_r, const ScenarioConfig& scenario,
                                 const RisSchedule& schedule, int r, const GridSpec& grid,
                                 double power_w, bool refine) {
  const Workspace ws = make_workspace(scenario, schedule);
  return estimate_aod_ws(ws, y_r, scenario, schedule, r, grid, power_w, refine);
}

std::vector<Eigen::VectorXcd> decode_at(const Eigen::VectorXcd& y, double cfo_hz,
                                        const ScenarioConfig& scenario,
                                        const RisSchedule& schedule) {
  return decode_at_ws(y, cfo_hz, scenario, schedule);
}

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

ChannelEstimate estimate_los(const Observation& obs, const ScenarioConfig& scenario,
                             const RisSchedule& schedule, double power_w, const GridSpec& grid,
                             std::optional<double> fixed_cfo) {
  const Workspace ws = make_workspace(scenario, schedule);
  ChannelEstimate est;
  est.los = true;
  est.cfo_hz = fixed_cfo ? *fixed_cfo : estimate_cfo_los(obs.y, scenario, grid);

  const std::vector<Eigen::VectorXcd> streams =
      decode_at_ws(obs.y, est.cfo_hz, scenario, schedule);
  for (int r = 1; r <= schedule.num_ris(); ++r) {
    const AodEstimate aod =
        estimate_aod_ws(ws, streams[r], scenario, schedule, r, grid, power_w, true);
    est.aods.push_back(aod.angle);
    est.degenerate = est.degenerate || aod.degenerate;
  }

  const Eigen::VectorXcd gains =
      conditional_gains(obs.y, est.cfo_hz, est.aods, true, scenario, schedule, power_w);
  est.gains.assign(gains.data(), gains.data() + gains.size());
  est.residual = model_residual(obs.y, est, scenario, schedule, power_w);
  return est;
}

namespace {

// Compressed NLoS residual: gains solved in closed form for each candidate.
double nlos_residual(const Eigen::VectorXcd& y, double cfo_hz, const std::vector<Angle2>& aods,
                     const ScenarioConfig& scenario, const RisSchedule& schedule,
                     double power_w) {
  const Eigen::MatrixXcd a = model_matrix(cfo_hz, aods, false, scenario, schedule, power_w);
  const Eigen::VectorXcd gains = a.colPivHouseholderQr().solve(y);
  return (y - a * gains).squaredNorm();
}

}  // namespace

ChannelEstimate estimate_nlos_ml(const Observation& obs, const ScenarioConfig& scenario,
                                 const RisSchedule& schedule, double power_w,
                                 const GridSpec& grid, std::optional<double> fixed_cfo) {
  const Workspace ws = make_workspace(scenario, schedule);
  const int num_ris = schedule.num_ris();

  double best_nu;
  if (fixed_cfo) {
    best_nu = *fixed_cfo;
  } else {
    double lo, hi;
    cfo_grid_range(scenario, grid, lo, hi);
    const int points = grid.cfo_points_nlos_ml;
    const double step = (hi - lo) / points;

    // The coded model columns live in orthogonal Hadamard subspaces, so the
    // full-signal residual for a CFO candidate collapses to
    // |y|^2 - L * sum_r |y_r' xbar_r|^2 / |xbar_r|^2 with the decoded
    // streams of that candidate; no joint gain solve is needed here.
    const double total_energy = obs.y.squaredNorm();
    double best_residual = std::numeric_limits<double>::infinity();
    best_nu = lo;
    for (int g = 0; g < points; ++g) {
      const double nu = lo + g * step;
      const std::vector<Eigen::VectorXcd> streams = decode_at_ws(obs.y, nu, scenario, schedule);
      double absorbed = 0.0;
      for (int r = 1; r <= num_ris; ++r)
        absorbed += fast_aod_pick(ws, streams[r], scenario, r, grid).objective;
      const double res = total_energy - schedule.code_length * absorbed;
      if (res < best_residual) {
        best_residual = res;
        best_nu = nu;
      }
    }
  }

  // Per-RIS refinement at the winning CFO seeds the joint refinement.
  const std::vector<Eigen::VectorXcd> streams = decode_at_ws(obs.y, best_nu, scenario, schedule);
  ChannelEstimate est;
  est.los = false;
  est.cfo_hz = best_nu;
  for (int r = 1; r <= num_ris; ++r) {
    const AodEstimate aod =
        estimate_aod_ws(ws, streams[r], scenario, schedule, r, grid, power_w, true);
    est.aods.push_back(aod.angle);
    est.degenerate = est.degenerate || aod.degenerate;
  }

  if (grid.refine && !fixed_cfo) {
    // Joint (nu, theta_1..theta_R) descent on the compressed residual.
    const auto objective = [&](const Eigen::VectorXd& x) {
      std::vector<Angle2> aods;
      for (int r = 0; r < num_ris; ++r) aods.push_back(Angle2{x(1 + 2 * r), x(2 + 2 * r)});
      return nlos_residual(obs.y, x(0), aods, scenario, schedule, power_w);
    };
    Eigen::VectorXd x0(1 + 2 * num_ris), scales(1 + 2 * num_ris);
    x0(0) = est.cfo_hz;
    scales(0) = 1.0 / (2.0 * M_PI * scenario.num_transmissions * scenario.sampling_time_s);
    const double s = std::max(beamwidth(scenario) / 8.0, 1e-5);
    for (int r = 0; r < num_ris; ++r) {
      x0(1 + 2 * r) = est.aods[r].az;
      x0(2 + 2 * r) = est.aods[r].el;
      scales(1 + 2 * r) = s;
      scales(2 + 2 * r) = s / std::clamp(std::cos(est.aods[r].el), 0.05, 1.0);
    }
    const RefineResult res =
        refine_local(objective, x0, scales, grid.refine_tol, grid.refine_max_iters);
    est.cfo_hz = res.x(0);
    for (int r = 0; r < num_ris; ++r)
      est.aods[r] = Angle2{wrap_angle(res.x(1 + 2 * r)), res.x(2 + 2 * r)};
  }

  const Eigen::VectorXcd gains =
      conditional_gains(obs.y, est.cfo_hz, est.aods, false, scenario, schedule, power_w);
  est.gains.assign(gains.data(), gains.data() + gains.size());
  est.residual = model_residual(obs.y, est, scenario, schedule, power_w);
  return est;
}

double lc_cfo_objective(const Eigen::MatrixXcd& reshaped, const RisSchedule& schedule,
                        double cfo_hz, double sampling_time_s) {
  const int code_length = schedule.code_length;
  Eigen::VectorXcd d(code_length);
  for (int l = 0; l < code_length; ++l)
    d(l) = std::polar(1.0, -2.0 * M_PI * sampling_time_s * cfo_hz * l);
  const Eigen::MatrixXcd rotated = d.asDiagonal() * reshaped;
  double acc = 0.0;
  for (int r = 1; r <= schedule.num_ris(); ++r)
    acc += (schedule.codes[r].cast<cplx>().transpose() * rotated).squaredNorm();
  return acc;
}

ChannelEstimate estimate_nlos_lc(const Observation& obs, const ScenarioConfig& scenario,
                                 const RisSchedule& schedule, double power_w,
                                 const GridSpec& grid, std::optional<double> fixed_cfo) {
  const Workspace ws = make_workspace(scenario, schedule);
  double best_nu;
  if (fixed_cfo) {
    best_nu = *fixed_cfo;
  } else {
    const Eigen::MatrixXcd reshaped = reshape_observations(obs.y, schedule.code_length);
    double lo, hi;
    cfo_grid_range(scenario, grid, lo, hi);
    const int points = grid.cfo_points;
    const double step = (hi - lo) / points;

    double best_val = -1.0;
    best_nu = lo;
    for (int g = 0; g < points; ++g) {
      const double nu = lo + g * step;
      const double val = lc_cfo_objective(reshaped, schedule, nu, scenario.sampling_time_s);
      if (val > best_val) {
        best_val = val;
        best_nu = nu;
      }
    }
    if (grid.refine) {
      const auto objective = [&](const Eigen::VectorXd& x) {
        return -lc_cfo_objective(reshaped, schedule, x(0), scenario.sampling_time_s);
      };
      Eigen::VectorXd x0(1), scales(1);
      x0 << best_nu;
      scales << std::max(step, 1.0);
      best_nu = refine_local(objective, x0, scales, grid.refine_tol, grid.refine_max_iters).x(0);
      best_nu = std::clamp(best_nu, lo, hi);
    }
  }

  ChannelEstimate est;
  est.los = false;
  est.cfo_hz = best_nu;
  const std::vector<Eigen::VectorXcd> streams = decode_at_ws(obs.y, best_nu, scenario, schedule);
  for (int r = 1; r <= schedule.num_ris(); ++r) {
    const AodEstimate aod =
        estimate_aod_ws(ws, streams[r], scenario, schedule, r, grid, power_w, true);
    est.aods.push_back(aod.angle);
    est.degenerate = est.degenerate || aod.degenerate;
  }
  const Eigen::VectorXcd gains =
      conditional_gains(obs.y, est.cfo_hz, est.aods, false, scenario, schedule, power_w);
  est.gains.assign(gains.data(), gains.data() + gains.size());
  est.residual = model_residual(obs.y, est, scenario, schedule, power_w);
  return est;
}

double residual_interference(const ScenarioConfig& scenario, const RisSchedule& schedule,
                             double cfo_hz) {
  const int num_paths = schedule.num_ris() + 1;
  double worst = 0.0;
  for (int src = 0; src < num_paths; ++src) {
    PathGains gains;
    std::vector<Angle2> aods;
    for (int r = 0; r < schedule.num_ris(); ++r) {
      gains.ris.push_back(src == r + 1 ? cplx(1.0, 0.0) : cplx(0.0, 0.0));
      aods.push_back(scenario.true_aod(r));
    }
    if (src == 0) gains.los = cplx(1.0, 0.0);

    const Eigen::VectorXcd z_at =
        noise_free_signal(scenario, schedule, 1.0, cfo_hz, gains, aods);
    const Eigen::VectorXcd z_0 = noise_free_signal(scenario, schedule, 1.0, 0.0, gains, aods);
    const Eigen::MatrixXcd at = reshape_observations(z_at, schedule.code_length);
    const Eigen::MatrixXcd ref = reshape_observations(z_0, schedule.code_length);

    const double own = decode(ref, schedule.codes[src]).squaredNorm();
    if (own <= 0.0) continue;
    for (int other = 0; other < num_paths; ++other) {
      if (other == src) continue;
      worst = std::max(worst, decode(at, schedule.codes[other]).squaredNorm() / own);
    }
  }
  return worst;
}

}  // namespace risloc

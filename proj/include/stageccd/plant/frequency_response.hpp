#ifndef STAGECCD_PLANT_FREQUENCY_RESPONSE_HPP
#define STAGECCD_PLANT_FREQUENCY_RESPONSE_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stageccd/errors.hpp"
#include "stageccd/structural/modal.hpp"

namespace stageccd {

using Complex = std::complex<double>;

/// Logarithmically spaced grid of `n` points from `w0` to `w1` (rad/s).
inline Eigen::VectorXd log_grid(double w0, double w1, int n) {
  if (!(w0 > 0 && w1 > w0) || n < 2) throw InvalidArgument("log_grid: need 0 < w0 < w1 and n >= 2");
  Eigen::VectorXd g(n);
  const double a = std::log10(w0);
  const double b = std::log10(w1);
  for (int k = 0; k < n; ++k) g[k] = std::pow(10.0, a + (b - a) * k / (n - 1));
  g[0] = w0;
  g[n - 1] = w1;
  return g;
}

/// Default plant grid: 400 points over 0.1 Hz .. 5 kHz.
inline Eigen::VectorXd default_plant_grid() { return log_grid(hz_to_rad(0.1), hz_to_rad(5000.0), 400); }

inline double magnitude_db(Complex v) { return 20.0 * std::log10(std::abs(v)); }
inline double phase_deg(Complex v) { return std::arg(v) * 180.0 / std::numbers::pi; }

/// Sampled complex response, one column per channel.
struct FrequencyResponse {
  Eigen::VectorXd grid;  // rad/s, strictly increasing
  Eigen::MatrixXcd values;
  std::vector<std::string> labels;

  Eigen::Index size() const { return grid.size(); }
  Eigen::Index channels() const { return values.cols(); }

  void validate() const {
    if (grid.size() < 2) throw InvalidArgument("FrequencyResponse: grid needs at least two points");
    if (!(grid[0] > 0)) throw InvalidArgument("FrequencyResponse: grid must start above 0 rad/s");
    for (Eigen::Index k = 1; k < grid.size(); ++k) {
      if (!(grid[k] > grid[k - 1])) throw InvalidArgument("FrequencyResponse: grid must be strictly increasing");
    }
    if (values.rows() != grid.size()) throw InvalidArgument("FrequencyResponse: values/grid size mismatch");
    if (!values.allFinite()) throw InvalidArgument("FrequencyResponse: non-finite response value");
  }

  /// Value of `channel` at `w`, interpolated linearly in log frequency on log
  /// magnitude and unwrapped phase. Throws outside the grid.
  Complex at(double w, Eigen::Index channel = 0) const {
    if (channel < 0 || channel >= channels()) throw InvalidArgument("FrequencyResponse::at: bad channel");
    const double lo = grid[0];
    const double hi = grid[grid.size() - 1];
    if (!(w >= lo * (1 - 1e-12) && w <= hi * (1 + 1e-12))) {
      std::ostringstream os;
      os << "frequency " << w << " rad/s lies outside the response grid [" << lo << ", " << hi << "]";
      throw DomainError(os.str());
    }
    const auto* begin = grid.data();
    const auto* end = grid.data() + grid.size();
    Eigen::Index k = std::upper_bound(begin, end, w) - begin;
    k = std::clamp<Eigen::Index>(k, 1, grid.size() - 1);
    const Complex a = values(k - 1, channel);
    const Complex b = values(k, channel);
    if (a == 0.0 || b == 0.0) {
      const double t = (w - grid[k - 1]) / (grid[k] - grid[k - 1]);
      return a + t * (b - a);
    }
    const double t = std::log(w / grid[k - 1]) / std::log(grid[k] / grid[k - 1]);
    const double lm = std::log(std::abs(a)) + t * (std::log(std::abs(b)) - std::log(std::abs(a)));
    double dp = std::arg(b) - std::arg(a);
    while (dp > std::numbers::pi) dp -= 2 * std::numbers::pi;
    while (dp < -std::numbers::pi) dp += 2 * std::numbers::pi;
    return std::polar(std::exp(lm), std::arg(a) + t * dp);
  }

  FrequencyResponse channel(Eigen::Index k) const {
    FrequencyResponse r;
    r.grid = grid;
    r.values = values.col(k);
    r.labels = {k < static_cast<Eigen::Index>(labels.size()) ? labels[static_cast<std::size_t>(k)] : ""};
    return r;
  }
};

/// freq_hz, then <label>_mag_db and <label>_phase_deg for every channel.
inline void write_frequency_response_csv(std::ostream& os, const FrequencyResponse& fr) {
  os << "freq_hz";
  for (Eigen::Index c = 0; c < fr.channels(); ++c) {
    const std::string l = c < static_cast<Eigen::Index>(fr.labels.size()) ? fr.labels[static_cast<std::size_t>(c)]
                                                                            : "ch" + std::to_string(c + 1);
    os << ',' << l << "_mag_db," << l << "_phase_deg";
  }
  os << '\n';
  os.precision(12);
  for (Eigen::Index k = 0; k < fr.size(); ++k) {
    os << rad_to_hz(fr.grid[k]);
    for (Eigen::Index c = 0; c < fr.channels(); ++c) {
      os << ',' << magnitude_db(fr.values(k, c)) << ',' << phase_deg(fr.values(k, c));
    }
    os << '\n';
  }
}

/// Single-channel form with the fixed header freq_hz,mag_db,phase_deg.
inline void write_bode_csv(std::ostream& os, const FrequencyResponse& fr, Eigen::Index channel = 0) {
  os << "freq_hz,mag_db,phase_deg\n";
  os.precision(12);
  for (Eigen::Index k = 0; k < fr.size(); ++k) {
    const Complex v = fr.values(k, channel);
    os << rad_to_hz(fr.grid[k]) << ',' << magnitude_db(v) << ',' << phase_deg(v) << '\n';
  }
}

}  // namespace stageccd

#endif  // STAGECCD_PLANT_FREQUENCY_RESPONSE_HPP

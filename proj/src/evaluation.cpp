#include "obce/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace obce {

double nmse_db(const std::vector<Eigen::MatrixXcd>& estimates,
               const std::vector<Eigen::MatrixXcd>& truths) {
  if (estimates.empty() || estimates.size() != truths.size()) {
    throw std::invalid_argument("nmse_db: empty or mismatched batch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const double truth_norm2 = truths[i].squaredNorm();
    if (!(truth_norm2 > 0.0)) {
      throw std::invalid_argument("nmse_db: zero-norm truth");
    }
    acc += (estimates[i] - truths[i]).squaredNorm() / truth_norm2;
  }
  const double ratio = acc / static_cast<double>(estimates.size());
  if (ratio <= 0.0) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(ratio));
}

double nmse_db(const Eigen::MatrixXcd& estimate, const Eigen::MatrixXcd& truth) {
  return nmse_db(std::vector<Eigen::MatrixXcd>{estimate},
                 std::vector<Eigen::MatrixXcd>{truth});
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "estimator,N,K,Q,snr_db,metric,value,sample_count\n";
  for (const auto& row : rows) {
    std::ostringstream value;
    value.precision(10);
    value << row.value;
    out << row.estimator << ',' << row.num_antennas << ',' << row.num_users
        << ',' << row.num_pilots << ',' << row.snr_db << ',' << row.metric
        << ',' << value.str() << ',' << row.sample_count << '\n';
  }
  return out.str();
}

void EvalReport::save_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write report to " + path);
  }
  out << to_csv();
}

void EvalReport::merge(const EvalReport& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

EvalReport evaluate_nmse(const Dataset& test_set,
                         const std::vector<NamedEstimator>& estimators) {
  const DatasetManifest& m = test_set.manifest();
  EvalReport report;
  for (const auto& estimator : estimators) {
    // bucket samples by SNR, preserving dataset order for determinism
    std::map<double, std::pair<std::vector<Eigen::MatrixXcd>,
                               std::vector<Eigen::MatrixXcd>>> buckets;
    for (int i = 0; i < test_set.size(); ++i) {
      const Eigen::MatrixXcd truth = test_set.channel_matrix(i);
      const Eigen::MatrixXcd est = estimator.estimate(
          test_set.observation_matrix(i), test_set.pilots(i), truth);
      auto& bucket = buckets[test_set.snr_db(i)];
      bucket.first.push_back(est);
      bucket.second.push_back(truth);
    }
    for (const auto& [snr, bucket] : buckets) {
      ReportRow row;
      row.estimator = estimator.name;
      row.num_antennas = m.num_antennas;
      row.num_users = m.num_users;
      row.num_pilots = m.num_pilots;
      row.snr_db = snr;
      row.metric = "nmse_db";
      row.value = nmse_db(bucket.first, bucket.second);
      row.sample_count = static_cast<int>(bucket.first.size());
      report.rows.push_back(row);
    }
  }
  return report;
}

std::vector<int> ia_beam_select(const Eigen::MatrixXcd& angular_estimate) {
  const int num_beams = static_cast<int>(angular_estimate.rows());
  const int num_users = static_cast<int>(angular_estimate.cols());
  if (num_users > num_beams) {
    throw std::invalid_argument("ia_beam_select: more users than beams");
  }
  // Strongest unresolved (user, beam) pair settles first, so a user losing a
  // collision falls back to its best beam still unclaimed at that point.
  // Scanning all pairs in magnitude order realizes that per-step rule.
  struct Bid {
    double magnitude;
    int beam;
    int user;
  };
  std::vector<Bid> bids;
  bids.reserve(static_cast<std::size_t>(num_beams) * num_users);
  for (int beam = 0; beam < num_beams; ++beam) {
    for (int user = 0; user < num_users; ++user) {
      bids.push_back({std::abs(angular_estimate(beam, user)), beam, user});
    }
  }
  std::sort(bids.begin(), bids.end(), [](const Bid& a, const Bid& b) {
    if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
    if (a.beam != b.beam) return a.beam < b.beam;  // deterministic tie-break
    return a.user < b.user;
  });
  std::vector<int> assignment(num_users, -1);
  std::vector<bool> beam_taken(num_beams, false);
  int remaining = num_users;
  for (const Bid& bid : bids) {
    if (remaining == 0) break;
    if (assignment[bid.user] >= 0 || beam_taken[bid.beam]) continue;
    assignment[bid.user] = bid.beam;
    beam_taken[bid.beam] = true;
    --remaining;
  }
  return assignment;
}

double sum_rate(const Eigen::MatrixXcd& true_spatial,
                const Eigen::MatrixXcd& estimated_spatial, double snr_db) {
  if (true_spatial.rows() != estimated_spatial.rows() ||
      true_spatial.cols() != estimated_spatial.cols()) {
    throw std::invalid_argument("sum_rate: shape mismatch");
  }
  const int num_users = static_cast<int>(true_spatial.cols());
  const AngularTransform u = dft_matrix(static_cast<int>(true_spatial.rows()));
  const Eigen::MatrixXcd angular_est = u.matrix * estimated_spatial;
  const Eigen::MatrixXcd angular_true = u.matrix * true_spatial;

  const std::vector<int> beams = ia_beam_select(angular_est);
  Eigen::MatrixXcd reduced_est(num_users, num_users);   // users x beams
  Eigen::MatrixXcd reduced_true(num_users, num_users);
  for (int b = 0; b < num_users; ++b) {
    reduced_est.col(b) = angular_est.row(beams[b]).transpose();
    reduced_true.col(b) = angular_true.row(beams[b]).transpose();
  }

  // zero-forcing on the estimate, ridge-regularized against singular
  // reduced channels
  constexpr double kRidge = 1e-6;
  const Eigen::MatrixXcd gram =
      reduced_est * reduced_est.adjoint() +
      kRidge * Eigen::MatrixXcd::Identity(num_users, num_users);
  Eigen::MatrixXcd precoder = reduced_est.adjoint() * gram.inverse();
  for (int k = 0; k < num_users; ++k) {
    const double norm = precoder.col(k).norm();
    if (norm > 0.0) precoder.col(k) /= norm;  // equal per-user power
  }

  const Eigen::MatrixXcd effective = reduced_true * precoder;  // users x users
  const double noise_var = snr_to_noise_variance(snr_db);
  double rate = 0.0;
  for (int k = 0; k < num_users; ++k) {
    const double signal = std::norm(effective(k, k));
    double interference = 0.0;
    for (int j = 0; j < num_users; ++j) {
      if (j != k) interference += std::norm(effective(k, j));
    }
    rate += std::log2(1.0 + signal / (interference + noise_var));
  }
  return rate;
}

EvalReport evaluate_sum_rate(const Dataset& test_set,
                             const std::vector<NamedEstimator>& estimators,
                             const std::vector<double>& snr_grid_db) {
  const DatasetManifest& m = test_set.manifest();
  EvalReport report;
  for (const auto& estimator : estimators) {
    for (const double snr : snr_grid_db) {
      double acc = 0.0;
      int count = 0;
      for (int i = 0; i < test_set.size(); ++i) {
        if (test_set.snr_db(i) != snr) continue;
        const Eigen::MatrixXcd truth = test_set.channel_matrix(i);
        const Eigen::MatrixXcd est = estimator.estimate(
            test_set.observation_matrix(i), test_set.pilots(i), truth);
        acc += sum_rate(truth, est, snr);
        ++count;
      }
      if (count == 0) continue;
      ReportRow row;
      row.estimator = estimator.name;
      row.num_antennas = m.num_antennas;
      row.num_users = m.num_users;
      row.num_pilots = m.num_pilots;
      row.snr_db = snr;
      row.metric = "sum_rate_bps_hz";
      row.value = acc / count;
      row.sample_count = count;
      report.rows.push_back(row);
    }
  }
  return report;
}

namespace {
std::pair<double, double> mean_std(const std::vector<double>& xs) {
  double mean = 0.0;
  for (const double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (const double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());
  return {mean, std::sqrt(var)};
}
}  // namespace

TimingReport timing_benchmark(const StageFn& cgan_stage,
                              const StageFn& ridnet_stage, int warmup,
                              int iterations) {
  if (iterations < 1) {
    throw std::invalid_argument("timing_benchmark: iterations must be >= 1");
  }
  using clock = std::chrono::steady_clock;
  auto time_ms = [](const StageFn& fn) {
    const auto t0 = clock::now();
    fn();
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };
  for (int i = 0; i < warmup; ++i) {
    cgan_stage();
    ridnet_stage();
  }
  std::vector<double> cgan_ms, ridnet_ms, combined_ms;
  cgan_ms.reserve(iterations);
  ridnet_ms.reserve(iterations);
  combined_ms.reserve(iterations);
  for (int i = 0; i < iterations; ++i) {
    cgan_ms.push_back(time_ms(cgan_stage));
    ridnet_ms.push_back(time_ms(ridnet_stage));
    // full pipeline timed as one unit
    combined_ms.push_back(time_ms([&] {
      cgan_stage();
      ridnet_stage();
    }));
  }
  TimingReport report;
  report.warmup = warmup;
  report.iterations = iterations;
  std::tie(report.cgan_mean_ms, report.cgan_std_ms) = mean_std(cgan_ms);
  std::tie(report.ridnet_mean_ms, report.ridnet_std_ms) = mean_std(ridnet_ms);
  std::tie(report.combined_mean_ms, report.combined_std_ms) = mean_std(combined_ms);
  return report;
}

}  // namespace obce

#ifndef OBCE_EVALUATION_HPP
#define OBCE_EVALUATION_HPP

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "obce/dataset.hpp"

namespace obce {

// Channel estimator under test: maps one observation (plus pilots) to a
// complex N x K spatial-domain estimate. The true channel is passed so that
// oracle references (perfect CSI) fit the same interface; learned estimators
// ignore it.
using EstimatorFn =
    std::function<Eigen::MatrixXcd(const Eigen::MatrixXcd& observation,
                                   const PilotMatrix& pilots,
                                   const Eigen::MatrixXcd& true_channel)>;

struct NamedEstimator {
  std::string name;
  EstimatorFn estimate;
};

struct ReportRow {
  std::string estimator;
  int num_antennas = 0;
  int num_users = 0;
  int num_pilots = 0;
  double snr_db = 0.0;
  std::string metric;
  double value = 0.0;
  int sample_count = 0;
};

struct EvalReport {
  std::vector<ReportRow> rows;

  std::string to_csv() const;
  void save_csv(const std::string& path) const;
  void merge(const EvalReport& other);
};

struct TimingReport {
  double cgan_mean_ms = 0.0;
  double cgan_std_ms = 0.0;
  double ridnet_mean_ms = 0.0;
  double ridnet_std_ms = 0.0;
  double combined_mean_ms = 0.0;
  double combined_std_ms = 0.0;
  int batch_size = 1;
  int warmup = 0;
  int iterations = 0;
};

constexpr double kNmseFloorDb = -120.0;

// 10 log10(E[||est - truth||^2 / ||truth||^2]); floor at -120 dB
double nmse_db(const std::vector<Eigen::MatrixXcd>& estimates,
               const std::vector<Eigen::MatrixXcd>& truths);
double nmse_db(const Eigen::MatrixXcd& estimate, const Eigen::MatrixXcd& truth);

// Per-SNR NMSE of each estimator over the test dataset.
EvalReport evaluate_nmse(const Dataset& test_set,
                         const std::vector<NamedEstimator>& estimators);

// One beam (row of the angular channel) per user, by magnitude, with
// collisions resolved in favour of the strongest user; returns K distinct
// beam indices.
std::vector<int> ia_beam_select(const Eigen::MatrixXcd& angular_estimate);

// Sum rate over the beams selected from the estimate, zero-forcing precoding
// on the reduced beamspace channel, rates evaluated against the true channel
// with equal per-user power.
double sum_rate(const Eigen::MatrixXcd& true_spatial,
                const Eigen::MatrixXcd& estimated_spatial, double snr_db);

EvalReport evaluate_sum_rate(const Dataset& test_set,
                             const std::vector<NamedEstimator>& estimators,
                             const std::vector<double>& snr_grid_db);

using StageFn = std::function<void()>;

TimingReport timing_benchmark(const StageFn& cgan_stage,
                              const StageFn& ridnet_stage, int warmup,
                              int iterations);

}  // namespace obce

#endif  // OBCE_EVALUATION_HPP

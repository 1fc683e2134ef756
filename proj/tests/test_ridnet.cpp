#include <torch/torch.h>

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>
#include <vector>

#include "obce/cgan.hpp"
#include "obce/config.hpp"
#include "obce/dataset.hpp"
#include "obce/evaluation.hpp"
#include "obce/ridnet.hpp"

using namespace obce;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("obce_ridnet_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig smoke_config() {
  ExperimentConfig config = ExperimentConfig::desk_preset();
  config.num_antennas = 16;
  config.num_users = 8;
  config.num_pilots = 4;
  config.num_samples = 100;
  config.cgan.epochs = 1;
  config.cgan.gen_filters = 8;
  config.cgan.disc_filters = 8;
  config.ridnet.epochs = 1;
  config.ridnet.filters = 8;
  return config;
}

// checkpoint directory holding a freshly constructed (identity) denoiser
fs::path write_fresh_checkpoint(const std::string& name, int filters, int n,
                                int k, double scale,
                                const std::string& domain) {
  const fs::path dir = fresh_dir(name);
  Ridnet net(filters, 4);
  torch::save(net, (dir / "ridnet.pt").string());
  CheckpointInfo info;
  info.stage = "ridnet";
  info.config_hash = "test";
  info.scale = scale;
  info.domain = domain;
  info.filters = filters;
  info.eau_count = 4;
  info.num_antennas = n;
  info.num_users = k;
  save_checkpoint_info(dir.string(), info);
  return dir;
}

}  // namespace

TEST_CASE("feature extraction emits the configured channel count") {
  torch::manual_seed(0);
  Ridnet net(64, 4);
  const auto features = net->feature_extract(torch::randn({2, 2, 16, 8}));
  CHECK(features.size(1) == 64);
  CHECK(features.size(2) == 16);
  CHECK(features.size(3) == 8);
}

TEST_CASE("feature extraction is linear when the bias is removed") {
  torch::manual_seed(1);
  Ridnet net(16, 4);
  torch::NoGradGuard guard;
  net->conv_fe->bias.zero_();
  const auto x = torch::randn({1, 2, 8, 8});
  const auto fx = net->feature_extract(x);
  const auto f3x = net->feature_extract(3.0 * x);
  CHECK(torch::allclose(f3x, 3.0 * fx, 1e-5, 1e-6));
}

TEST_CASE("attention unit preserves shape and gates in (0,1)") {
  torch::manual_seed(2);
  Eau eau(16);
  eau->eval();
  const auto x = torch::randn({2, 16, 8, 8});
  const auto y = eau->forward(x);
  CHECK(y.sizes() == x.sizes());

  // recompute the gate from the unit's own pooling branch
  torch::NoGradGuard guard;
  auto fused = torch::relu(eau->fuse->forward(torch::cat(
      {torch::relu(eau->branch1->forward(x)),
       torch::relu(eau->branch2->forward(x))}, 1)));
  auto r1 = torch::relu(
      fused + eau->rb1_conv2->forward(torch::relu(eau->rb1_conv1->forward(fused))));
  auto r2 = torch::relu(
      r1 + eau->rb2_flatten->forward(torch::relu(
               eau->rb2_conv2->forward(torch::relu(eau->rb2_conv1->forward(r1))))));
  const auto gate = torch::sigmoid(eau->gate_conv2->forward(torch::relu(
      eau->gate_conv1->forward(torch::adaptive_avg_pool2d(r2, {1, 1})))));
  CHECK(gate.min().item<double>() > 0.0);
  CHECK(gate.max().item<double>() < 1.0);
  CHECK(torch::allclose(y, x + gate * r2, 1e-5, 1e-6));
}

TEST_CASE("zeroed gate reduces the attention unit to the identity") {
  torch::manual_seed(3);
  Eau eau(16);
  eau->gate_override_zero = true;
  const auto x = torch::randn({2, 16, 8, 8});
  CHECK(torch::equal(eau->forward(x), x));
}

TEST_CASE("zeroed gates make feature learning a pure doubling") {
  // each EAU passes its input through; the long skip then adds f_H0 again
  torch::manual_seed(4);
  Ridnet net(16, 4);
  net->set_gate_override(true);
  const auto f0 = net->feature_extract(torch::randn({1, 2, 8, 8}));
  const auto fr = net->feature_learning(f0);
  CHECK(torch::allclose(fr, 2.0 * f0, 1e-6, 1e-7));
}

TEST_CASE("reconstruction layer starts at exact zero") {
  torch::manual_seed(5);
  Ridnet net(16, 4);
  const auto features = torch::randn({1, 16, 8, 8});
  const auto residual = net->reconstruct(features);
  CHECK(residual.size(1) == 2);
  CHECK(residual.abs().max().item<double>() == 0.0);
  const auto out = net->forward(torch::randn({1, 2, 8, 8}));
  CHECK(out.abs().max().item<double>() == 0.0);
}

TEST_CASE("freshly initialized denoiser is a bit-exact identity") {
  const int n = 16, k = 8;
  const fs::path dir =
      write_fresh_checkpoint("identity", 8, n, k, 1.7, "spatial");
  const RidnetDenoiser denoiser = RidnetDenoiser::load(dir.string());
  SampleRng rng(6, 0, StreamPurpose::kNoise);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::MatrixXcd coarse(n, k);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < k; ++c) coarse(r, c) = rng.complex_gaussian();
    }
    const Eigen::MatrixXcd refined = denoiser.denoise(coarse);
    REQUIRE(refined.rows() == n);
    REQUIRE(refined.cols() == k);
    // bit-exact, not approximate
    CHECK((refined.array() == coarse.array()).all());
  }
  fs::remove_all(dir);
}

TEST_CASE("ridnet loss follows the element-mean convention") {
  const auto target = torch::zeros({4, 2, 8, 8});
  CHECK(ridnet_loss(target, target).item<double>() == 0.0);
  const auto off = torch::full({4, 2, 8, 8}, 0.5);
  CHECK(ridnet_loss(off, target).item<double>() == doctest::Approx(0.5));
  // batch permutation invariance
  torch::manual_seed(7);
  const auto pred = torch::randn({4, 2, 8, 8});
  const auto truth = torch::randn({4, 2, 8, 8});
  const auto perm = torch::tensor({3L, 1L, 0L, 2L});
  CHECK(ridnet_loss(pred, truth).item<double>() ==
        doctest::Approx(ridnet_loss(pred.index_select(0, perm),
                                    truth.index_select(0, perm))
                            .item<double>())
            .epsilon(1e-12));
}

TEST_CASE("angular-domain NMSE equals spatial-domain NMSE") {
  // unitarity of the beamspace transform preserves error and truth norms
  const auto t = dft_matrix(16);
  SampleRng rng(8, 0, StreamPurpose::kPaths);
  Eigen::MatrixXcd truth(16, 4), est(16, 4);
  for (int r = 0; r < 16; ++r) {
    for (int c = 0; c < 4; ++c) {
      truth(r, c) = rng.complex_gaussian();
      est(r, c) = truth(r, c) + 0.1 * rng.complex_gaussian();
    }
  }
  const double spatial = nmse_db(est, truth);
  const double angular = nmse_db(t.matrix * est, t.matrix * truth);
  CHECK(spatial == doctest::Approx(angular).epsilon(1e-6));
}

TEST_CASE("learning-rate schedule walks the three milestone values") {
  const ExperimentConfig base = smoke_config();
  const fs::path data_dir = fresh_dir("lr_data");
  const fs::path cgan_dir = fresh_dir("lr_cgan");
  const fs::path ridnet_dir = fresh_dir("lr_ridnet");
  generate_dataset(base, data_dir.string());
  const Dataset dataset = load_dataset(data_dir.string());
  train_cgan(dataset, base, cgan_dir.string());

  ExperimentConfig config = base;
  config.ridnet.epochs = 10;
  const TrainLog log =
      train_ridnet(dataset, cgan_dir.string(), config, ChannelDomain::kSpatial,
                   ridnet_dir.string());
  REQUIRE(log.epochs.size() == 10);
  std::vector<double> lrs;
  for (const auto& row : log.epochs) lrs.push_back(row.lr);
  const std::set<double> distinct(lrs.begin(), lrs.end());
  const std::set<double> expected = {1e-4, 1e-5, 1e-6};
  CHECK(distinct == expected);
  // non-increasing over training
  for (std::size_t i = 1; i < lrs.size(); ++i) CHECK(lrs[i] <= lrs[i - 1]);
  CHECK(lrs.front() == 1e-4);
  CHECK(lrs.back() == 1e-6);

  fs::remove_all(data_dir);
  fs::remove_all(cgan_dir);
  fs::remove_all(ridnet_dir);
}

TEST_CASE("one-epoch smoke training in both domains") {
  const ExperimentConfig config = smoke_config();
  const fs::path data_dir = fresh_dir("smoke_data");
  const fs::path cgan_dir = fresh_dir("smoke_cgan");
  generate_dataset(config, data_dir.string());
  const Dataset dataset = load_dataset(data_dir.string());
  train_cgan(dataset, config, cgan_dir.string());

  for (const auto domain : {ChannelDomain::kSpatial, ChannelDomain::kAngular}) {
    const fs::path dir = fresh_dir(
        domain == ChannelDomain::kSpatial ? "smoke_spatial" : "smoke_angular");
    const TrainLog log = train_ridnet(dataset, cgan_dir.string(), config,
                                      domain, dir.string());
    REQUIRE(log.epochs.size() == 1);
    CHECK(std::isfinite(log.epochs[0].g_l1));
    const RidnetDenoiser denoiser = RidnetDenoiser::load(dir.string());
    CHECK(denoiser.domain() == domain);
    const Eigen::MatrixXcd coarse =
        CoarseEstimator::load(cgan_dir.string())
            .estimate(dataset.observation_matrix(0), dataset.pilots(0))
            .coarse;
    const Eigen::MatrixXcd refined = denoiser.denoise(coarse);
    CHECK(refined.rows() == config.num_antennas);
    CHECK(refined.cols() == config.num_users);
    fs::remove_all(dir);
  }
  fs::remove_all(data_dir);
  fs::remove_all(cgan_dir);
}

TEST_CASE("a cGAN checkpoint is rejected as a denoiser checkpoint") {
  const fs::path dir = fresh_dir("wrong_stage");
  Ridnet net(8, 4);
  torch::save(net, (dir / "ridnet.pt").string());
  CheckpointInfo info;
  info.stage = "cgan";
  info.filters = 8;
  save_checkpoint_info(dir.string(), info);
  CHECK_THROWS_AS(RidnetDenoiser::load(dir.string()), CheckpointError);
  fs::remove_all(dir);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "barynet/data.hpp"
#include "barynet/oracle.hpp"

using namespace barynet;

namespace {
std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
}  // namespace

TEST_CASE("mixture at z = -1 collapses to one isotropic Gaussian at the origin") {
  const Eigen::MatrixXd xs = gen_mixture_conditional(1, 100000, -1.0);
  CHECK(xs.colwise().mean().cwiseAbs().maxCoeff() < 0.02);
  const Eigen::RowVectorXd mean = xs.colwise().mean();
  const Eigen::MatrixXd centered = xs.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / 100000.0;
  CHECK(cov(0, 0) == doctest::Approx(0.1).epsilon(0.03));
  CHECK(cov(1, 1) == doctest::Approx(0.1).epsilon(0.03));
  CHECK(std::abs(cov(0, 1)) < 0.01);
}

TEST_CASE("mixture at z = 1: symmetric mean and the total-variance trace 2.2") {
  const Eigen::MatrixXd xs = gen_mixture_conditional(2, 100000, 1.0);
  CHECK(xs.colwise().mean().cwiseAbs().maxCoeff() < 0.02);
  const Eigen::RowVectorXd mean = xs.colwise().mean();
  const Eigen::MatrixXd centered = xs.rowwise() - mean;
  const double trace = centered.array().square().sum() / 100000.0;
  // law of total variance: within 2*0.1 plus between 2*1^2
  CHECK(trace == doctest::Approx(2.2).epsilon(0.03));
}

TEST_CASE("gen_mixture labels are uniform on [-1,1] and xs match the conditional law") {
  const LabeledSample s = gen_mixture(3, 50000);
  CHECK(s.size() == 50000);
  CHECK(s.zs.minCoeff() >= -1.0);
  CHECK(s.zs.maxCoeff() <= 1.0);
  CHECK(std::abs(s.zs.mean()) < 0.02);
  // mixture is symmetric: x1 + x2 has mean 0 at every z
  CHECK(std::abs((s.xs.col(0) + s.xs.col(1)).mean()) < 0.02);
}

TEST_CASE("gen_clusters: counts, K = 1, one point per cluster") {
  Eigen::MatrixXd centers(3, 2);
  centers << 0, 0, 10, 0, 0, 10;
  const ClusterData d = gen_clusters(4, centers, 0.3, 10);
  CHECK(d.xs.rows() == 10);
  int counts[3] = {0, 0, 0};
  for (int l : d.labels) ++counts[l];
  CHECK(counts[0] == 4);  // remainder spreads over the first cluster
  CHECK(counts[1] == 3);
  CHECK(counts[2] == 3);

  const ClusterData one = gen_clusters(5, centers.topRows(1), 0.5, 50);
  CHECK(one.xs.rows() == 50);
  for (int l : one.labels) CHECK(l == 0);

  const ClusterData tight = gen_clusters(6, centers, 0.0, 3);
  for (int i = 0; i < 3; ++i)
    CHECK((tight.xs.row(i) - centers.row(i)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("separated triangle blobs are recovered by the k-means reference") {
  Eigen::MatrixXd centers(3, 2);
  centers << 0, 0, 6, 0, 3, 5;
  const ClusterData d = gen_clusters(7, centers, 0.3, 90);
  const oracle::KmeansResult km = oracle::kmeans_reference(d.xs, 3, 11);
  // agreement up to permutation: map each true cluster to its majority label
  int mapping[3] = {-1, -1, -1};
  for (int c = 0; c < 3; ++c) {
    int votes[3] = {0, 0, 0};
    for (int i = 0; i < 90; ++i)
      if (d.labels[static_cast<std::size_t>(i)] == c)
        ++votes[km.labels[static_cast<std::size_t>(i)]];
    mapping[c] = static_cast<int>(std::max_element(votes, votes + 3) - votes);
  }
  CHECK(mapping[0] != mapping[1]);
  CHECK(mapping[1] != mapping[2]);
  int agree = 0;
  for (int i = 0; i < 90; ++i)
    if (km.labels[static_cast<std::size_t>(i)] ==
        mapping[d.labels[static_cast<std::size_t>(i)]])
      ++agree;
  CHECK(agree == 90);
}

TEST_CASE("latent curve: zero noise lies on the curve; x1 correlates with z") {
  const LatentCurveData d = gen_latent_curve(8, 500, 5, 0.0);
  for (int i = 0; i < 500; ++i) {
    CHECK(d.xs(i, 0) == d.z_true(i));
    CHECK(d.xs(i, 1) == doctest::Approx(std::sin(M_PI * d.z_true(i))).epsilon(1e-12));
    CHECK(d.xs(i, 2) == 0.0);
  }
  const LatentCurveData noisy = gen_latent_curve(9, 2000, 5, 0.05);
  CHECK(std::abs(oracle::pearson(noisy.z_true, noisy.xs.col(0))) > 0.99);
}

TEST_CASE("CSV round trip preserves values and the 1-based label convention") {
  LabeledSample s;
  s.xs.resize(3, 2);
  s.xs << 0.125, -7.5, 1e-17, 3.14159265358979, 2, -0.0625;
  s.zs.resize(3, 1);
  s.zs << 0.5, -0.25, 1.0;
  save_csv("/tmp/io_cont.csv", s);
  const LabeledSample back = load_csv("/tmp/io_cont.csv", 2, 1, false);
  CHECK((back.xs - s.xs).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.zs - s.zs).cwiseAbs().maxCoeff() == 0.0);

  LabeledSample disc;
  disc.xs.resize(2, 2);
  disc.xs << 1, 2, 3, 4;
  disc.labels = {0, 2};
  save_csv("/tmp/io_disc.csv", disc);
  const std::string text = slurp("/tmp/io_disc.csv");
  CHECK(text.find(",label") != std::string::npos);
  CHECK(text.find("1,2,1") != std::string::npos);  // 0-based 0 stored as 1
  const LabeledSample dback = load_csv("/tmp/io_disc.csv", 2, 0, true);
  CHECK(dback.labels == disc.labels);
}

TEST_CASE("CSV rejects missing values unless told to drop incomplete rows") {
  {
    std::ofstream f("/tmp/io_missing.csv");
    f << "x1,x2,z1\n1,2,0.5\n3,,0.7\n4,5,0.9\n";
  }
  CHECK_THROWS(load_csv("/tmp/io_missing.csv", 2, 1, false));
  const LabeledSample s = load_csv("/tmp/io_missing.csv", 2, 1, false, true);
  CHECK(s.size() == 2);
  CHECK(s.xs(1, 0) == 4.0);
}

TEST_CASE("identical seeds give byte-identical generated CSV files") {
  save_csv("/tmp/io_det_a.csv", gen_mixture(7, 500));
  save_csv("/tmp/io_det_b.csv", gen_mixture(7, 500));
  CHECK(slurp("/tmp/io_det_a.csv") == slurp("/tmp/io_det_b.csv"));
  save_csv("/tmp/io_det_c.csv", gen_mixture(8, 500));
  CHECK(slurp("/tmp/io_det_a.csv") != slurp("/tmp/io_det_c.csv"));
}

TEST_CASE("PPM: 1x1 white pixel decodes to (1,1,1)") {
  {
    std::ofstream f("/tmp/io_white.ppm", std::ios::binary);
    f << "P6\n1 1\n255\n";
    const unsigned char px[3] = {255, 255, 255};
    f.write(reinterpret_cast<const char*>(px), 3);
  }
  const Image img = load_image_ppm("/tmp/io_white.ppm");
  CHECK(img.width == 1);
  CHECK(img.height == 1);
  CHECK((img.pixels - Eigen::MatrixXd::Ones(1, 3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("PPM: 2x2 known bytes decode to the hand-computed points") {
  {
    std::ofstream f("/tmp/io_2x2.ppm", std::ios::binary);
    f << "P6\n2 2\n255\n";
    const unsigned char px[12] = {0, 0, 0, 255, 0, 0, 0, 255, 0, 51, 102, 204};
    f.write(reinterpret_cast<const char*>(px), 12);
  }
  const Image img = load_image_ppm("/tmp/io_2x2.ppm");
  CHECK(img.pixels(0, 0) == 0.0);
  CHECK(img.pixels(1, 0) == 1.0);
  CHECK(img.pixels(2, 1) == 1.0);
  CHECK(img.pixels(3, 0) == doctest::Approx(51.0 / 255.0).epsilon(1e-15));
  CHECK(img.pixels(3, 1) == doctest::Approx(102.0 / 255.0).epsilon(1e-15));
  CHECK(img.pixels(3, 2) == doctest::Approx(204.0 / 255.0).epsilon(1e-15));
}

TEST_CASE("PPM load-write round trip is bit-identical") {
  {
    std::ofstream f("/tmp/io_rt.ppm", std::ios::binary);
    f << "P6\n3 2\n255\n";
    unsigned char px[18];
    for (int i = 0; i < 18; ++i) px[i] = static_cast<unsigned char>(13 * i + 7);
    f.write(reinterpret_cast<const char*>(px), 18);
  }
  const Image img = load_image_ppm("/tmp/io_rt.ppm");
  write_image_ppm("/tmp/io_rt2.ppm", img);
  CHECK(slurp("/tmp/io_rt.ppm") == slurp("/tmp/io_rt2.ppm"));
}

TEST_CASE("PPM rejects wrong magic, maxval, and truncated data with a byte offset") {
  {
    std::ofstream f("/tmp/io_p5.ppm", std::ios::binary);
    f << "P5\n1 1\n255\n";
    f.put(0);
  }
  CHECK_THROWS_WITH_AS(load_image_ppm("/tmp/io_p5.ppm"),
                       doctest::Contains("byte offset"), std::runtime_error);
  {
    std::ofstream f("/tmp/io_max.ppm", std::ios::binary);
    f << "P6\n1 1\n127\n";
    const unsigned char px[3] = {0, 0, 0};
    f.write(reinterpret_cast<const char*>(px), 3);
  }
  CHECK_THROWS(load_image_ppm("/tmp/io_max.ppm"));
  {
    std::ofstream f("/tmp/io_trunc.ppm", std::ios::binary);
    f << "P6\n2 2\n255\n";
    f.put(1);
  }
  CHECK_THROWS(load_image_ppm("/tmp/io_trunc.ppm"));
}

TEST_CASE("write clamps out-of-cube colors back into [0,1]") {
  Image img;
  img.width = 2;
  img.height = 1;
  img.pixels.resize(2, 3);
  img.pixels << 1.4, -0.3, 0.5, 0.25, 2.0, -1.0;
  write_image_ppm("/tmp/io_clamp.ppm", img);
  const Image back = load_image_ppm("/tmp/io_clamp.ppm");
  CHECK(back.pixels(0, 0) == 1.0);
  CHECK(back.pixels(0, 1) == 0.0);
  CHECK(back.pixels(1, 1) == 1.0);
  CHECK(back.pixels(1, 2) == 0.0);
}

TEST_CASE("run manifest JSON round-trips losslessly") {
  RunManifest m;
  m.seed = 123456789;
  m.subcommand = "fit-supervised";
  m.parameters_json = R"({"arch_T":"3-7-7-2","lr":0.004,"iters":10000})";
  m.input_paths = {"in.csv"};
  m.output_paths = {"barycenter.csv", "curve.csv"};
  m.wall_time_sec = 12.5;
  m.metrics_json = R"({"final_loss":0.1234567890123456789})";
  const std::string once = m.to_json();
  const RunManifest back = RunManifest::from_json(once);
  CHECK(back.to_json() == once);
  CHECK(back.seed == m.seed);
  CHECK(back.subcommand == m.subcommand);
  CHECK(back.output_paths == m.output_paths);
}

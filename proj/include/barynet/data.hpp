#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "barynet/objectives.hpp"

namespace barynet {

// synthetic conditional-density benchmark: z ~ U[-1,1] and x a mixture of
// two isotropic Gaussians with means +-((z+1)/2, -(z+1)/2) and variance 0.1
LabeledSample gen_mixture(std::uint64_t seed, Eigen::Index n);

// fresh draws from one conditional rho(x|z) of the mixture
Eigen::MatrixXd gen_mixture_conditional(std::uint64_t seed, Eigen::Index n, double z);

struct ClusterData {
  Eigen::MatrixXd xs;
  std::vector<int> labels;  // ground truth, 0-based
};

// equal-weight isotropic Gaussian blobs; each of the K clusters receives
// floor(N/K) points with the remainder spread over the first clusters
ClusterData gen_clusters(std::uint64_t seed, const Eigen::MatrixXd& centers, double stddev,
                         Eigen::Index n);

struct LatentCurveData {
  Eigen::MatrixXd xs;        // N x dim
  Eigen::VectorXd z_true;    // hidden 1-D latent
};

// z* ~ U[-1,1]; x = (z*, sin(pi z*), 0, ...) + noise * N(0, I)
LatentCurveData gen_latent_curve(std::uint64_t seed, Eigen::Index n, int dim = 5,
                                 double noise = 0.05);

// CSV with header x1..xd,z1..zk (or x1..xd,label with 1-based labels).
// Missing values reject the row set unless drop_incomplete is set.
LabeledSample load_csv(const std::string& path, int x_cols, int z_cols, bool discrete_label,
                       bool drop_incomplete = false);
void save_csv(const std::string& path, const LabeledSample& sample);
void write_matrix_csv(const std::string& path, const std::vector<std::string>& header,
                      const Eigen::MatrixXd& m);
Eigen::MatrixXd load_matrix_csv(const std::string& path, bool expect_header = true);

struct Image {
  int width = 0, height = 0;
  Eigen::MatrixXd pixels;  // (width*height) x 3, channels in [0,1], row-major pixel order
};

// binary P6, maxval 255 only; malformed input reports the byte offset
Image load_image_ppm(const std::string& path);
void write_image_ppm(const std::string& path, const Image& img);

struct RunManifest {
  std::uint64_t seed = 0;
  std::string subcommand;
  std::string parameters_json = "{}";  // hyperparameters as a JSON object
  std::vector<std::string> input_paths;
  std::vector<std::string> output_paths;
  double wall_time_sec = 0.0;
  std::string metrics_json = "{}";

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
};

}  // namespace barynet

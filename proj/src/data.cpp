#include "barynet/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

#include "barynet/rng.hpp"

namespace barynet {

using json = nlohmann::json;

LabeledSample gen_mixture(std::uint64_t seed, Eigen::Index n) {
  if (n < 1) throw std::invalid_argument("gen_mixture: n must be positive");
  Rng rng(seed);
  LabeledSample s;
  s.xs.resize(n, 2);
  s.zs.resize(n, 1);
  const double sd = std::sqrt(0.1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = rng.uniform(-1.0, 1.0);
    const double a = (z + 1.0) / 2.0;
    const double sign = rng.uniform() < 0.5 ? 1.0 : -1.0;
    s.xs(i, 0) = sign * a + sd * rng.normal();
    s.xs(i, 1) = -sign * a + sd * rng.normal();
    s.zs(i, 0) = z;
  }
  return s;
}

Eigen::MatrixXd gen_mixture_conditional(std::uint64_t seed, Eigen::Index n, double z) {
  Rng rng(seed);
  Eigen::MatrixXd xs(n, 2);
  const double a = (z + 1.0) / 2.0;
  const double sd = std::sqrt(0.1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sign = rng.uniform() < 0.5 ? 1.0 : -1.0;
    xs(i, 0) = sign * a + sd * rng.normal();
    xs(i, 1) = -sign * a + sd * rng.normal();
  }
  return xs;
}

ClusterData gen_clusters(std::uint64_t seed, const Eigen::MatrixXd& centers, double stddev,
                         Eigen::Index n) {
  const Eigen::Index k = centers.rows();
  if (k < 1) throw std::invalid_argument("gen_clusters: need at least one center");
  if (n < k) throw std::invalid_argument("gen_clusters: need at least one point per cluster");
  Rng rng(seed);
  ClusterData d;
  d.xs.resize(n, centers.cols());
  d.labels.reserve(static_cast<std::size_t>(n));
  Eigen::Index row = 0;
  for (Eigen::Index c = 0; c < k; ++c) {
    const Eigen::Index count = n / k + (c < n % k ? 1 : 0);
    for (Eigen::Index i = 0; i < count; ++i, ++row) {
      for (Eigen::Index j = 0; j < centers.cols(); ++j)
        d.xs(row, j) = centers(c, j) + stddev * rng.normal();
      d.labels.push_back(static_cast<int>(c));
    }
  }
  return d;
}

LatentCurveData gen_latent_curve(std::uint64_t seed, Eigen::Index n, int dim, double noise) {
  if (n < 10) throw std::invalid_argument("gen_latent_curve: need at least 10 points");
  if (dim < 2) throw std::invalid_argument("gen_latent_curve: need dim >= 2");
  Rng rng(seed);
  LatentCurveData d;
  d.xs = Eigen::MatrixXd::Zero(n, dim);
  d.z_true.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = rng.uniform(-1.0, 1.0);
    d.z_true(i) = z;
    d.xs(i, 0) = z;
    d.xs(i, 1) = std::sin(M_PI * z);
    for (int j = 0; j < dim; ++j) d.xs(i, j) += noise * rng.normal();
  }
  return d;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

void format_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

LabeledSample load_csv(const std::string& path, int x_cols, int z_cols, bool discrete_label,
                       bool drop_incomplete) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + path);
  const int want = x_cols + (discrete_label ? 1 : z_cols);
  if (static_cast<int>(split_csv_line(line).size()) != want)
    throw std::runtime_error("CSV header column count mismatch in " + path);

  std::vector<std::vector<double>> xs;
  std::vector<std::vector<double>> zs;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != want)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": wrong column count");
    bool incomplete = false;
    for (const auto& f : fields)
      if (f.empty()) incomplete = true;
    if (incomplete) {
      if (drop_incomplete) continue;
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": missing value (use --drop-incomplete to skip)");
    }
    std::vector<double> xrow, zrow;
    for (int c = 0; c < x_cols; ++c) xrow.push_back(std::stod(fields[static_cast<std::size_t>(c)]));
    if (discrete_label) {
      const int lab = std::stoi(fields[static_cast<std::size_t>(x_cols)]);
      if (lab < 1)
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": labels are 1-based");
      labels.push_back(lab - 1);
    } else {
      for (int c = 0; c < z_cols; ++c)
        zrow.push_back(std::stod(fields[static_cast<std::size_t>(x_cols + c)]));
      zs.push_back(std::move(zrow));
    }
    xs.push_back(std::move(xrow));
  }
  if (xs.empty()) throw std::runtime_error("no data rows in " + path);

  LabeledSample s;
  s.xs.resize(static_cast<Eigen::Index>(xs.size()), x_cols);
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (int c = 0; c < x_cols; ++c) s.xs(static_cast<Eigen::Index>(i), c) = xs[i][static_cast<std::size_t>(c)];
  if (discrete_label) {
    s.labels = std::move(labels);
  } else if (z_cols > 0) {
    s.zs.resize(static_cast<Eigen::Index>(zs.size()), z_cols);
    for (std::size_t i = 0; i < zs.size(); ++i)
      for (int c = 0; c < z_cols; ++c) s.zs(static_cast<Eigen::Index>(i), c) = zs[i][static_cast<std::size_t>(c)];
  }
  s.validate();
  return s;
}

void save_csv(const std::string& path, const LabeledSample& sample) {
  std::string out;
  for (Eigen::Index c = 0; c < sample.xs.cols(); ++c) {
    if (c) out += ',';
    out += "x" + std::to_string(c + 1);
  }
  if (sample.has_discrete()) {
    out += ",label";
  } else {
    for (Eigen::Index c = 0; c < sample.zs.cols(); ++c) out += ",z" + std::to_string(c + 1);
  }
  out += '\n';
  for (Eigen::Index i = 0; i < sample.size(); ++i) {
    for (Eigen::Index c = 0; c < sample.xs.cols(); ++c) {
      if (c) out += ',';
      format_double(out, sample.xs(i, c));
    }
    if (sample.has_discrete()) {
      out += ',' + std::to_string(sample.labels[static_cast<std::size_t>(i)] + 1);
    } else {
      for (Eigen::Index c = 0; c < sample.zs.cols(); ++c) {
        out += ',';
        format_double(out, sample.zs(i, c));
      }
    }
    out += '\n';
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << out;
}

void write_matrix_csv(const std::string& path, const std::vector<std::string>& header,
                      const Eigen::MatrixXd& m) {
  if (static_cast<Eigen::Index>(header.size()) != m.cols())
    throw std::invalid_argument("header/matrix column mismatch");
  std::string out;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c) out += ',';
    out += header[c];
  }
  out += '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      format_double(out, m(i, c));
    }
    out += '\n';
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << out;
}

Eigen::MatrixXd load_matrix_csv(const std::string& path, bool expect_header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (expect_header && !std::getline(in, line))
    throw std::runtime_error("empty CSV: " + path);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& f : split_csv_line(line)) row.push_back(std::stod(f));
    if (!rows.empty() && rows.back().size() != row.size())
      throw std::runtime_error("ragged CSV: " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("no data rows in " + path);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

namespace {

[[noreturn]] void ppm_fail(const std::string& path, std::streampos at, const std::string& why) {
  throw std::runtime_error(path + ": " + why + " (byte offset " +
                           std::to_string(static_cast<long long>(at)) + ")");
}

// one whitespace-delimited token, skipping '#' comments
std::string ppm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok += static_cast<char>(c);
  }
  return tok;
}

}  // namespace

Image load_image_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  const std::string magic = ppm_token(in);
  if (magic != "P6") ppm_fail(path, in.tellg(), "not a binary P6 PPM (magic '" + magic + "')");
  Image img;
  try {
    img.width = std::stoi(ppm_token(in));
    img.height = std::stoi(ppm_token(in));
  } catch (const std::exception&) {
    ppm_fail(path, in.tellg(), "bad width/height");
  }
  if (img.width <= 0 || img.height <= 0) ppm_fail(path, in.tellg(), "bad dimensions");
  int maxval = 0;
  try {
    maxval = std::stoi(ppm_token(in));
  } catch (const std::exception&) {
    ppm_fail(path, in.tellg(), "bad maxval");
  }
  if (maxval != 255) ppm_fail(path, in.tellg(), "maxval must be 255");

  const Eigen::Index n = static_cast<Eigen::Index>(img.width) * img.height;
  std::vector<unsigned char> raw(static_cast<std::size_t>(n) * 3);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size()))
    ppm_fail(path, in.tellg(), "truncated pixel data");

  img.pixels.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c)
      img.pixels(i, c) = raw[static_cast<std::size_t>(i) * 3 + static_cast<std::size_t>(c)] / 255.0;
  return img;
}

void write_image_ppm(const std::string& path, const Image& img) {
  const Eigen::Index n = static_cast<Eigen::Index>(img.width) * img.height;
  if (img.pixels.rows() != n || img.pixels.cols() != 3)
    throw std::invalid_argument("image pixel matrix must be (width*height) x 3");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> raw(static_cast<std::size_t>(n) * 3);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) {
      // computed colors can leave the cube; project back before quantizing
      const double v = std::min(1.0, std::max(0.0, img.pixels(i, c)));
      raw[static_cast<std::size_t>(i) * 3 + static_cast<std::size_t>(c)] =
          static_cast<unsigned char>(std::lround(v * 255.0));
    }
  f.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

std::string RunManifest::to_json() const {
  json j;
  j["seed"] = seed;
  j["subcommand"] = subcommand;
  j["parameters"] = json::parse(parameters_json);
  j["inputs"] = input_paths;
  j["outputs"] = output_paths;
  j["wall_time_sec"] = wall_time_sec;
  j["metrics"] = json::parse(metrics_json);
  return j.dump(2);
}

RunManifest RunManifest::from_json(const std::string& text) {
  const json j = json::parse(text);
  RunManifest m;
  m.seed = j.at("seed");
  m.subcommand = j.at("subcommand");
  m.parameters_json = j.at("parameters").dump();
  m.input_paths = j.at("inputs").get<std::vector<std::string>>();
  m.output_paths = j.at("outputs").get<std::vector<std::string>>();
  m.wall_time_sec = j.at("wall_time_sec");
  m.metrics_json = j.at("metrics").dump();
  return m;
}

}  // namespace barynet

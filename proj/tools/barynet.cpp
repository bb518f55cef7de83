// Command-line driver: synthetic data generation, BaryNet training,
// inverse fitting, conditional sampling, color transfer, oracle validation.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "barynet/data.hpp"
#include "barynet/oracle.hpp"
#include "barynet/training.hpp"
#include "barynet/transport.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace barynet;

namespace {

struct CommonOpts {
  std::uint64_t seed = 1;
  long iters = 10000;
  long batch = 0;
  double lr = 4e-3;
  std::string optimizer = "qitd";
  std::string cost = "sqeuclid";
  double gamma = 0.75, eps = 1e-3, beta = 0.1, lr_max = 2e-2;
  std::string out_dir = "run";
  bool center_full = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--iters", o.iters, "training iterations");
  cmd->add_option("--batch", o.batch, "minibatch size (0 = full sample)");
  cmd->add_option("--lr", o.lr, "learning rate (eta or eta^0)");
  cmd->add_option("--optimizer", o.optimizer, "omd | qitd | gda")
      ->check(CLI::IsMember({"omd", "qitd", "gda"}));
  cmd->add_option("--cost", o.cost, "sqeuclid | weighted:<Q.csv> | greatcircle");
  cmd->add_option("--gamma", o.gamma, "QITD line-search decay");
  cmd->add_option("--eps", o.eps, "QITD stopping threshold");
  cmd->add_option("--beta", o.beta, "QITD increase factor");
  cmd->add_option("--lr-max", o.lr_max, "QITD maximum learning rate");
  cmd->add_option("--out", o.out_dir, "run directory")->required();
  cmd->add_flag("--center-full", o.center_full,
                "center psi^Z over the full sample instead of the minibatch");
}

CostSpec parse_cost(const std::string& s) {
  if (s == "sqeuclid") return CostSpec::sq_euclidean();
  if (s == "greatcircle") return CostSpec::sq_great_circle();
  if (s.rfind("weighted:", 0) == 0)
    return CostSpec::weighted_quadratic(load_matrix_csv(s.substr(9), false));
  throw std::invalid_argument("unknown cost kind: " + s);
}

TrainConfig train_config(const CommonOpts& o) {
  TrainConfig cfg;
  if (o.optimizer == "omd")
    cfg.optimizer = SaddleKind::Omd;
  else if (o.optimizer == "gda")
    cfg.optimizer = SaddleKind::Gda;
  else
    cfg.optimizer = SaddleKind::Qitd;
  cfg.iters = o.iters;
  cfg.batch = o.batch;
  cfg.lr = o.lr;
  cfg.gamma = o.gamma;
  cfg.eps = o.eps;
  cfg.beta = o.beta;
  cfg.lr_max = o.lr_max;
  cfg.seed = o.seed;
  cfg.center_full_sample = o.center_full;
  return cfg;
}

NetSpec make_spec(const std::string& arch, bool zero_last = false, double leaky = 0.0,
                  double clamp = 0.0, bool bn = false) {
  NetSpec s;
  s.widths = NetSpec::parse_arch(arch);
  s.zero_init_last = zero_last;
  s.leaky_slope = leaky;
  s.batch_norm_hidden = bn;
  if (clamp > 0.0) s.clamp_bound = clamp;
  return s;
}

// loads the first x_cols columns, tolerating extra z/label columns
LabeledSample load_xs_only(const std::string& path, int x_cols) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string header;
  std::getline(f, header);
  int cols = header.empty() ? 0 : 1;
  for (char ch : header)
    if (ch == ',') ++cols;
  if (cols < x_cols) throw std::runtime_error(path + ": fewer columns than --x-cols");
  const bool labeled = header.size() >= 5 && header.substr(header.size() - 5) == "label";
  LabeledSample s = load_csv(path, x_cols, labeled ? 0 : cols - x_cols, labeled);
  LabeledSample out;
  out.xs = s.xs;
  return out;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + p.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_curve(const fs::path& p, const std::vector<CurveRow>& curve) {
  std::string out = "step,loss,eta\n";
  char buf[96];
  for (const auto& r : curve) {
    std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g\n", r.step, r.loss, r.eta);
    out += buf;
  }
  write_text(p, out);
}

void write_manifest(const fs::path& dir, RunManifest m, double wall_sec,
                    const std::string& name = "manifest.json") {
  m.wall_time_sec = wall_sec;
  write_text(dir / name, m.to_json() + "\n");
}

int run_gen(bool mixture, bool clusters, bool latent, std::uint64_t seed, long n, int dim,
            double noise, double blob_std, int blob_k, const std::string& out_dir) {
  fs::create_directories(out_dir);
  RunManifest man;
  man.seed = seed;
  man.subcommand = "gen";
  json params{{"n", n}};
  const auto t0 = std::chrono::steady_clock::now();
  if (mixture) {
    params["kind"] = "mixture";
    save_csv((fs::path(out_dir) / "sample.csv").string(), gen_mixture(seed, n));
  } else if (clusters) {
    params["kind"] = "clusters";
    params["k"] = blob_k;
    params["std"] = blob_std;
    Eigen::MatrixXd centers(blob_k, 2);
    for (int k = 0; k < blob_k; ++k) {
      // vertices spread on a circle of radius 4
      centers(k, 0) = 4.0 * std::cos(2.0 * M_PI * k / blob_k);
      centers(k, 1) = 4.0 * std::sin(2.0 * M_PI * k / blob_k);
    }
    const ClusterData d = gen_clusters(seed, centers, blob_std, n);
    LabeledSample s;
    s.xs = d.xs;
    s.labels = d.labels;
    save_csv((fs::path(out_dir) / "sample.csv").string(), s);
  } else if (latent) {
    params["kind"] = "latent-curve";
    params["dim"] = dim;
    params["noise"] = noise;
    const LatentCurveData d = gen_latent_curve(seed, n, dim, noise);
    LabeledSample s;
    s.xs = d.xs;
    s.zs = d.z_true;
    save_csv((fs::path(out_dir) / "sample.csv").string(), s);
  } else {
    std::cerr << "error: pick one of --mixture/--clusters/--latent-curve\n";
    return 1;
  }
  man.parameters_json = params.dump();
  man.output_paths = {"sample.csv"};
  write_manifest(out_dir, man,
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BaryNet: optimal-transport barycenter learning toolkit"};
  app.require_subcommand(1);

  // ---- gen ----
  auto* gen = app.add_subcommand("gen", "generate a synthetic sample");
  bool g_mixture = false, g_clusters = false, g_latent = false;
  long g_n = 500;
  int g_dim = 5, g_k = 3;
  double g_noise = 0.05, g_std = 0.3;
  std::uint64_t g_seed = 1;
  std::string g_out;
  gen->add_flag("--mixture", g_mixture, "two-Gaussian mixture with z ~ U[-1,1]");
  gen->add_flag("--clusters", g_clusters, "isotropic Gaussian blobs");
  gen->add_flag("--latent-curve", g_latent, "curve with a hidden 1-D latent");
  gen->add_option("-n,--n", g_n, "sample size");
  gen->add_option("--dim", g_dim, "ambient dimension (latent-curve)");
  gen->add_option("--noise", g_noise, "noise level (latent-curve)");
  gen->add_option("--k", g_k, "cluster count");
  gen->add_option("--std", g_std, "cluster standard deviation");
  gen->add_option("--seed", g_seed, "RNG seed");
  gen->add_option("--out", g_out, "run directory")->required();

  // ---- fit-supervised ----
  auto* fsup = app.add_subcommand("fit-supervised", "supervised BaryNet on labeled data");
  CommonOpts so;
  std::string s_data, s_arch_t = "3-7-7-2", s_arch_py = "2-6-6-1", s_arch_pz = "1-5-1";
  int s_xcols = 2, s_zcols = 1;
  bool s_discrete = false, s_drop = false;
  int s_labels = 0;
  add_common(fsup, so);
  fsup->add_option("--data", s_data, "input CSV (header x1..xd,z1..zk or x1..xd,label)")
      ->required();
  fsup->add_option("--x-cols", s_xcols, "number of x columns");
  fsup->add_option("--z-cols", s_zcols, "number of z columns");
  fsup->add_flag("--discrete-labels", s_discrete, "last column holds 1-based labels");
  fsup->add_option("--labels", s_labels, "label count (discrete; 0 = infer)");
  fsup->add_flag("--drop-incomplete", s_drop, "skip rows with missing values");
  fsup->add_option("--arch-T", s_arch_t, "transport residual widths");
  fsup->add_option("--arch-psiY", s_arch_py, "psi^Y widths");
  fsup->add_option("--arch-psiZ", s_arch_pz, "psi^Z widths (continuous labels)");

  // ---- fit-unsupervised ----
  auto* funs = app.add_subcommand("fit-unsupervised", "latent factor discovery, Euclidean Z");
  CommonOpts uo;
  std::string u_data, u_arch_t = "6-7-7-5", u_arch_py = "5-8-1", u_arch_pz = "1-5-1",
              u_arch_z = "5-16-1";
  int u_xcols = 5, u_zdim = 1;
  double u_clamp = 0.1;
  int u_inner = 1;
  add_common(funs, uo);
  funs->add_option("--data", u_data, "input CSV (x columns only used)")->required();
  funs->add_option("--x-cols", u_xcols, "number of x columns");
  funs->add_option("--z-dim", u_zdim, "latent dimension");
  funs->add_option("--arch-T", u_arch_t, "transport residual widths");
  funs->add_option("--arch-psiY", u_arch_py, "psi^Y widths");
  funs->add_option("--arch-psiZ", u_arch_pz, "psi^Z widths");
  funs->add_option("--arch-z", u_arch_z, "label net widths");
  funs->add_option("--clamp", u_clamp, "label net parameter clamp bound (0 = off)");
  funs->add_option("--disc-inner", u_inner, "extra max-block steps per iteration");

  // ---- cluster ----
  auto* clus = app.add_subcommand("cluster", "discrete factor discovery (clustering)");
  CommonOpts co;
  std::string c_data, c_arch_py = "2-8-1", c_arch_t;
  int c_xcols = 2, c_k = 3;
  long c_label_every = 10;
  double c_bandwidth = 2.0;
  add_common(clus, co);
  clus->add_option("--data", c_data, "input CSV (x columns only used)")->required();
  clus->add_option("--x-cols", c_xcols, "number of x columns");
  clus->add_option("--k", c_k, "cluster count");
  clus->add_option("--arch-T", c_arch_t, "per-label residual widths (default d-6-d)");
  clus->add_option("--arch-psiY", c_arch_py, "psi^Y widths");
  clus->add_option("--label-every", c_label_every, "label net update period");
  clus->add_option("--seed-bandwidth", c_bandwidth, "soft k-means++ seeding bandwidth");

  // ---- invert ----
  auto* inv = app.add_subcommand("invert", "fit the inverse transport by regression");
  std::string i_run, i_arch_s, i_optimizer = "sgd";
  long i_iters = 20000, i_batch = 0;
  double i_lr = 5e-2;
  std::uint64_t i_seed = 1;
  inv->add_option("--run", i_run, "run directory produced by fit-supervised/fit-unsupervised")
      ->required();
  inv->add_option("--arch-S", i_arch_s, "inverse residual widths (default: same as T)");
  inv->add_option("--optimizer", i_optimizer, "sgd | adam")
      ->check(CLI::IsMember({"sgd", "adam"}));
  inv->add_option("--iters", i_iters, "regression steps");
  inv->add_option("--batch", i_batch, "minibatch size (0 = full)");
  inv->add_option("--lr", i_lr, "learning rate");
  inv->add_option("--seed", i_seed, "RNG seed");

  // ---- sample-conditional ----
  auto* cond = app.add_subcommand("sample-conditional", "draw {S(y_i, z)} for a fixed label");
  std::string q_run;
  std::vector<double> q_z;
  int q_label = 0;
  cond->add_option("--run", q_run, "run directory holding pair.json and barycenter.csv")
      ->required();
  cond->add_option("--z", q_z, "continuous label value (one per z dimension)");
  cond->add_option("--label", q_label, "discrete label (1-based)");

  // ---- color-transfer ----
  auto* color = app.add_subcommand("color-transfer", "pairwise palette transfer via 2K maps");
  CommonOpts ko;
  ko.optimizer = "omd";
  ko.iters = 20000;
  ko.batch = 1000;
  ko.lr = 1e-3;
  std::vector<std::string> k_images;
  std::string k_arch_t = "3-12-12-3", k_arch_py = "3-12-12-1";
  long k_inv_iters = 4000;
  double k_inv_lr = 1e-3;
  add_common(color, ko);
  color->add_option("--images", k_images, "input P6 PPM images (one per label)")
      ->required()
      ->expected(2, 16);
  color->add_option("--arch-T", k_arch_t, "per-label transport residual widths");
  color->add_option("--arch-psiY", k_arch_py, "psi^Y widths");
  color->add_option("--invert-iters", k_inv_iters, "inverse regression steps");
  color->add_option("--invert-lr", k_inv_lr, "inverse regression learning rate");

  // ---- validate ----
  auto* val = app.add_subcommand("validate", "run the oracle suite and emit a JSON report");
  std::string v_out;
  val->add_option("--out", v_out, "report directory (default: stdout only)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    if (*gen)
      return run_gen(g_mixture, g_clusters, g_latent, g_seed, g_n, g_dim, g_noise, g_std, g_k,
                     g_out);

    if (*fsup) {
      const LabeledSample sample =
          load_csv(s_data, s_xcols, s_discrete ? 0 : s_zcols, s_discrete, s_drop);
      fs::create_directories(so.out_dir);
      const CostSpec cost = parse_cost(so.cost);
      Rng rng(so.seed);
      SupervisedModel m;
      if (s_discrete) {
        int labels = s_labels;
        if (labels == 0)
          for (int l : sample.labels) labels = std::max(labels, l + 1);
        m = SupervisedModel::finite(static_cast<int>(sample.xs.cols()), labels,
                                    make_spec(s_arch_t, true), make_spec(s_arch_py, false, 0.1),
                                    rng);
      } else {
        m = SupervisedModel::continuous(static_cast<int>(sample.xs.cols()),
                                        static_cast<int>(sample.zs.cols()),
                                        make_spec(s_arch_t, true), make_spec(s_arch_py, true),
                                        make_spec(s_arch_pz), rng);
      }
      const FitResult fit = fit_supervised(m, sample, cost, train_config(so));
      const Eigen::MatrixXd ys = push_to_barycenter(sample, m.T, m.w);
      save_csv((fs::path(so.out_dir) / "sample.csv").string(), sample);
      write_curve(fs::path(so.out_dir) / "curve.csv", fit.curve);
      std::vector<std::string> header;
      for (Eigen::Index c = 0; c < ys.cols(); ++c) header.push_back("y" + std::to_string(c + 1));
      write_matrix_csv((fs::path(so.out_dir) / "barycenter.csv").string(), header, ys);
      write_text(fs::path(so.out_dir) / "model.json", m.to_json() + "\n");
      RunManifest man;
      man.seed = so.seed;
      man.subcommand = "fit-supervised";
      man.parameters_json =
          json{{"arch_T", s_arch_t},   {"arch_psiY", s_arch_py}, {"arch_psiZ", s_arch_pz},
               {"optimizer", so.optimizer}, {"iters", so.iters},      {"batch", so.batch},
               {"lr", so.lr},          {"gamma", so.gamma},      {"eps", so.eps},
               {"beta", so.beta},      {"lr_max", so.lr_max},    {"cost", so.cost}}
              .dump();
      man.input_paths = {s_data};
      man.output_paths = {"sample.csv", "curve.csv", "barycenter.csv", "model.json"};
      man.metrics_json = json{{"final_loss", fit.final_loss}}.dump();
      write_manifest(so.out_dir, man, elapsed());
      return 0;
    }

    if (*funs) {
      const LabeledSample in = load_xs_only(u_data, u_xcols);
      fs::create_directories(uo.out_dir);
      const CostSpec cost = parse_cost(uo.cost);
      Rng rng(uo.seed);
      FactorModel m = FactorModel::deterministic(
          u_xcols, u_zdim, make_spec(u_arch_z, false, 0.1, u_clamp), make_spec(u_arch_t, true),
          make_spec(u_arch_py, true, 0.1), make_spec(u_arch_pz, false, 0.1), rng);
      if (u_clamp > 0.0) m.z_net.clamp(m.w);
      TrainConfig cfg = train_config(uo);
      cfg.disc_inner_steps = u_inner;
      const FitResult fit = fit_factor_deterministic(m, in.xs, cost, cfg);
      const Eigen::MatrixXd zs = assign_latents(m, in.xs);
      LabeledSample labeled;
      labeled.xs = in.xs;
      labeled.zs = zs;
      save_csv((fs::path(uo.out_dir) / "sample.csv").string(), labeled);
      std::vector<std::string> zh;
      for (int c = 0; c < u_zdim; ++c) zh.push_back("z" + std::to_string(c + 1));
      write_matrix_csv((fs::path(uo.out_dir) / "latents.csv").string(), zh, zs);
      const Eigen::MatrixXd ys = push_to_barycenter(labeled, m.T, m.w);
      std::vector<std::string> header;
      for (Eigen::Index c = 0; c < ys.cols(); ++c) header.push_back("y" + std::to_string(c + 1));
      write_matrix_csv((fs::path(uo.out_dir) / "barycenter.csv").string(), header, ys);
      write_curve(fs::path(uo.out_dir) / "curve.csv", fit.curve);
      write_text(fs::path(uo.out_dir) / "model.json", m.to_json() + "\n");
      RunManifest man;
      man.seed = uo.seed;
      man.subcommand = "fit-unsupervised";
      man.parameters_json = json{{"arch_T", u_arch_t},   {"arch_psiY", u_arch_py},
                                 {"arch_psiZ", u_arch_pz}, {"arch_z", u_arch_z},
                                 {"clamp", u_clamp},     {"optimizer", uo.optimizer},
                                 {"iters", uo.iters},    {"batch", uo.batch},
                                 {"lr", uo.lr},          {"cost", uo.cost},
                                 {"disc_inner", u_inner}}
                                .dump();
      man.input_paths = {u_data};
      man.output_paths = {"sample.csv", "latents.csv", "barycenter.csv", "curve.csv",
                          "model.json"};
      man.metrics_json = json{{"final_loss", fit.final_loss}}.dump();
      write_manifest(uo.out_dir, man, elapsed());
      return 0;
    }

    if (*clus) {
      const LabeledSample in = load_xs_only(c_data, c_xcols);
      fs::create_directories(co.out_dir);
      const CostSpec cost = parse_cost(co.cost);
      Rng rng(co.seed);
      NetSpec logits;
      logits.widths = {c_xcols, c_k};
      NetSpec t_spec;
      if (c_arch_t.empty()) {
        t_spec.widths = {c_xcols, 6, c_xcols};
        t_spec.zero_init_last = true;
      } else {
        t_spec = make_spec(c_arch_t, true);
      }
      FactorModel m = FactorModel::discrete(c_xcols, c_k, logits, t_spec,
                                            make_spec(c_arch_py, false, 0.1), rng);
      seed_logits_soft_kmeans(m, in.xs, c_bandwidth, co.seed);
      TrainConfig cfg = train_config(co);
      cfg.label_update_every = c_label_every;
      const FitResult fit = fit_factor_discrete(m, in.xs, cost, cfg);
      const std::vector<int> labels = assign_labels(m, in.xs);
      LabeledSample out;
      out.xs = in.xs;
      out.labels = labels;
      save_csv((fs::path(co.out_dir) / "labels.csv").string(), out);
      write_curve(fs::path(co.out_dir) / "curve.csv", fit.curve);
      write_text(fs::path(co.out_dir) / "model.json", m.to_json() + "\n");
      RunManifest man;
      man.seed = co.seed;
      man.subcommand = "cluster";
      man.parameters_json = json{{"k", c_k},
                                 {"arch_psiY", c_arch_py},
                                 {"optimizer", co.optimizer},
                                 {"iters", co.iters},
                                 {"lr", co.lr},
                                 {"label_every", c_label_every},
                                 {"seed_bandwidth", c_bandwidth}}
                                .dump();
      man.input_paths = {c_data};
      man.output_paths = {"labels.csv", "curve.csv", "model.json"};
      man.metrics_json = json{{"final_loss", fit.final_loss}}.dump();
      write_manifest(co.out_dir, man, elapsed());
      return 0;
    }

    if (*inv) {
      const fs::path dir(i_run);
      const json mj = json::parse(read_text(dir / "model.json"));
      const std::string kind = mj.at("kind");
      LabeledSample sample;
      TransportNet T;
      ad::ParamVector w_t;
      NetSpec t_spec;
      if (kind.rfind("supervised", 0) == 0) {
        SupervisedModel m = SupervisedModel::from_json(read_text(dir / "model.json"));
        t_spec = m.T.nets[0].spec();
        sample = load_csv((dir / "sample.csv").string(), m.T.x_dim,
                          m.T.discrete ? 0 : m.T.z_dim, m.T.discrete);
        T = m.T;
        w_t = m.w;
      } else {
        FactorModel m = FactorModel::from_json(read_text(dir / "model.json"));
        t_spec = m.T.nets[0].spec();
        sample = load_csv((dir / "sample.csv").string(), m.T.x_dim, m.T.z_dim, false);
        T = m.T;
        w_t = m.w;
      }
      InverseFitConfig cfg;
      cfg.optimizer = (i_optimizer == "adam") ? InverseOptimizer::Adam : InverseOptimizer::Sgd;
      cfg.iters = i_iters;
      cfg.batch = i_batch;
      cfg.lr = i_lr;
      cfg.seed = i_seed;
      NetSpec s_spec = i_arch_s.empty() ? t_spec : make_spec(i_arch_s);
      s_spec.zero_init_last = true;
      const TransportPair pair =
          fit_inverse(sample, T, w_t, s_spec, CostSpec::sq_euclidean(), cfg);
      write_text(dir / "pair.json", pair.to_json() + "\n");
      RunManifest man;
      man.seed = i_seed;
      man.subcommand = "invert";
      man.parameters_json = json{{"optimizer", i_optimizer},
                                 {"iters", i_iters},
                                 {"batch", i_batch},
                                 {"lr", i_lr}}
                                .dump();
      man.input_paths = {(dir / "model.json").string(), (dir / "sample.csv").string()};
      man.output_paths = {"pair.json"};
      man.metrics_json = json{{"final_regression_loss", pair.final_regression_loss}}.dump();
      write_manifest(dir, man, elapsed(), "invert_manifest.json");
      std::printf("final regression loss: %.6g\n", pair.final_regression_loss);
      return 0;
    }

    if (*cond) {
      const fs::path dir(q_run);
      const TransportPair pair = TransportPair::from_json(read_text(dir / "pair.json"));
      const Eigen::MatrixXd ys = load_matrix_csv((dir / "barycenter.csv").string());
      Eigen::MatrixXd out;
      std::string tag;
      if (q_label >= 1) {
        out = sample_conditional_label(pair, ys, q_label - 1);
        tag = "label" + std::to_string(q_label);
      } else {
        if (q_z.empty()) {
          std::cerr << "error: sample-conditional needs --z or --label\n";
          return 1;
        }
        const Eigen::VectorXd z =
            Eigen::Map<const Eigen::VectorXd>(q_z.data(), static_cast<Eigen::Index>(q_z.size()));
        out = sample_conditional(pair, ys, z);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "z%g", q_z[0]);
        tag = buf;
      }
      std::vector<std::string> header;
      for (Eigen::Index c = 0; c < out.cols(); ++c) header.push_back("x" + std::to_string(c + 1));
      write_matrix_csv((dir / ("conditional_" + tag + ".csv")).string(), header, out);
      return 0;
    }

    if (*color) {
      fs::create_directories(ko.out_dir);
      std::vector<Image> images;
      LabeledSample sample;
      Eigen::Index total = 0;
      for (const auto& p : k_images) {
        images.push_back(load_image_ppm(p));
        total += images.back().pixels.rows();
      }
      const int k = static_cast<int>(images.size());
      sample.xs.resize(total, 3);
      Eigen::Index row = 0;
      for (int i = 0; i < k; ++i) {
        const auto& px = images[static_cast<std::size_t>(i)].pixels;
        sample.xs.middleRows(row, px.rows()) = px;
        for (Eigen::Index j = 0; j < px.rows(); ++j) sample.labels.push_back(i);
        row += px.rows();
      }
      const CostSpec cost = parse_cost(ko.cost);
      Rng rng(ko.seed);
      SupervisedModel m = SupervisedModel::finite(3, k, make_spec(k_arch_t, true),
                                                  make_spec(k_arch_py, false, 0.1), rng);
      TrainConfig cfg = train_config(ko);
      if (cfg.optimizer == SaddleKind::Qitd && m.w.size() > 4000)
        throw std::runtime_error("QITD stores a dense dim(w)^2 matrix; use --optimizer omd");
      const FitResult fit = fit_supervised(m, sample, cost, cfg);
      InverseFitConfig icfg;
      icfg.optimizer = InverseOptimizer::Adam;
      icfg.iters = k_inv_iters;
      icfg.batch = 3000;
      icfg.lr = k_inv_lr;
      icfg.seed = ko.seed + 1;
      const TransportPair pair =
          fit_inverse(sample, m.T, m.w, make_spec(k_arch_t, true), cost, icfg);
      write_text(fs::path(ko.out_dir) / "pair.json", pair.to_json() + "\n");
      write_curve(fs::path(ko.out_dir) / "curve.csv", fit.curve);
      std::vector<std::string> outputs = {"pair.json", "curve.csv"};
      for (int src = 0; src < k; ++src)
        for (int dst = 0; dst < k; ++dst) {
          Image out = images[static_cast<std::size_t>(src)];
          for (Eigen::Index i = 0; i < out.pixels.rows(); ++i)
            out.pixels.row(i) =
                compose_pairwise(pair, src, pair, dst, out.pixels.row(i).transpose()).transpose();
          const std::string name =
              "transfer_" + std::to_string(src + 1) + "_to_" + std::to_string(dst + 1) + ".ppm";
          write_image_ppm((fs::path(ko.out_dir) / name).string(), out);
          outputs.push_back(name);
        }
      RunManifest man;
      man.seed = ko.seed;
      man.subcommand = "color-transfer";
      man.parameters_json = json{{"arch_T", k_arch_t},
                                 {"arch_psiY", k_arch_py},
                                 {"optimizer", ko.optimizer},
                                 {"iters", ko.iters},
                                 {"batch", ko.batch},
                                 {"lr", ko.lr},
                                 {"invert_iters", k_inv_iters},
                                 {"invert_lr", k_inv_lr},
                                 {"maps_trained", 2 * k}}
                                .dump();
      man.input_paths = k_images;
      man.output_paths = outputs;
      man.metrics_json = json{{"final_loss", fit.final_loss},
                              {"final_regression_loss", pair.final_regression_loss}}
                             .dump();
      write_manifest(ko.out_dir, man, elapsed());
      return 0;
    }

    if (*val) {
      json checks = json::array();
      bool all_pass = true;
      auto check = [&](const std::string& name, double residual, double tol) {
        const bool pass = residual < tol;
        all_pass = all_pass && pass;
        checks.push_back({{"check_name", name}, {"residual", residual}, {"pass", pass}});
        std::printf("%-44s residual %.3e  %s\n", name.c_str(), residual, pass ? "pass" : "FAIL");
      };

      {
        using namespace barynet::oracle;
        const GaussianSpec a = GaussianSpec::isotropic(Eigen::VectorXd::Zero(2), 1.0, 0.5);
        const GaussianSpec b = GaussianSpec::isotropic(Eigen::VectorXd::Zero(2), 3.0, 0.5);
        const FixedPointResult iso = gaussian_barycenter_fixed_point({a, b});
        check("gaussian_barycenter_isotropic_std_mean",
              (iso.barycenter.cov - 4.0 * Eigen::MatrixXd::Identity(2, 2)).norm(), 1e-8);
        check("gaussian_barycenter_fixed_point_residual", iso.residual, 1e-10);

        GaussianSpec c1, c2;
        c1.mean = Eigen::Vector2d(0, 0);
        c1.cov = Eigen::Vector2d(1, 4).asDiagonal();
        c1.weight = 0.5;
        c2.mean = Eigen::Vector2d(0, 0);
        c2.cov = Eigen::Vector2d(9, 16).asDiagonal();
        c2.weight = 0.5;
        const FixedPointResult comm = gaussian_barycenter_fixed_point({c1, c2});
        check("gaussian_barycenter_commuting_closed_form",
              (comm.barycenter.cov - Eigen::MatrixXd(Eigen::Vector2d(4, 9).asDiagonal())).norm(),
              1e-8);

        check("gaussian_w2_translation",
              std::abs(gaussian_w2(GaussianSpec::isotropic(Eigen::VectorXd::Zero(1), 1.0),
                                   GaussianSpec::isotropic(Eigen::VectorXd::Constant(1, 3.0),
                                                           1.0)) -
                       9.0),
              1e-10);
        check("gaussian_w2_dilation",
              std::abs(gaussian_w2(GaussianSpec::isotropic(Eigen::VectorXd::Zero(1), 1.0),
                                   GaussianSpec::isotropic(Eigen::VectorXd::Zero(1), 3.0)) -
                       4.0),
              1e-10);

        std::vector<std::pair<Conditional, double>> diracs;
        diracs.emplace_back(Eigen::VectorXd::Constant(1, 1.0), 0.5);
        diracs.emplace_back(Eigen::VectorXd::Constant(1, -1.0), 0.5);
        check("variance_decomposition_dirac_pair", variance_decomposition_check(diracs), 1e-12);

        Rng vr(99);
        double worst_vd = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
          const int d = 1 + static_cast<int>(vr.below(3));
          const int kk = 2 + static_cast<int>(vr.below(4));
          std::vector<std::pair<Conditional, double>> mix;
          Eigen::VectorXd ww(kk);
          for (int i = 0; i < kk; ++i) ww(i) = 0.2 + vr.uniform();
          ww /= ww.sum();
          for (int i = 0; i < kk; ++i) {
            GaussianSpec g;
            g.mean = Eigen::VectorXd::NullaryExpr(d, [&](Eigen::Index) { return vr.normal(); });
            Eigen::MatrixXd r(d, d);
            for (Eigen::Index e = 0; e < r.size(); ++e) r(e / d, e % d) = vr.normal();
            g.cov = r * r.transpose() + 0.05 * Eigen::MatrixXd::Identity(d, d);
            mix.emplace_back(g, ww(i));
          }
          worst_vd = std::max(worst_vd, variance_decomposition_check(mix));
        }
        check("variance_decomposition_random_gaussians", worst_vd, 1e-6);

        Rng lr(7);
        double worst_lp = 0.0, worst_marginal = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
          const int n = 2 + static_cast<int>(lr.below(3));
          Eigen::MatrixXd pa(n, 2), pb(n, 2);
          for (Eigen::Index e = 0; e < pa.size(); ++e) {
            pa(e % n, e / n) = lr.normal();
            pb(e % n, e / n) = lr.normal();
          }
          const DiscreteDist s1 = DiscreteDist::uniform(pa), s2 = DiscreteDist::uniform(pb);
          const LpResult lp = discrete_ot_lp(s1, s2, CostSpec::sq_euclidean());
          worst_lp = std::max(
              worst_lp,
              std::abs(lp.cost - ot_enumerate_permutations(s1, s2, CostSpec::sq_euclidean())));
          worst_marginal = std::max(worst_marginal,
                                    (lp.plan.rowwise().sum() - s1.masses).cwiseAbs().maxCoeff());
          worst_marginal =
              std::max(worst_marginal,
                       (lp.plan.colwise().sum().transpose() - s2.masses).cwiseAbs().maxCoeff());
        }
        check("lp_vs_permutation_enumeration", worst_lp, 1e-9);
        check("lp_plan_marginals", worst_marginal, 1e-10);

        Rng mr(13);
        double worst_sq = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
          const int d = 1 + static_cast<int>(mr.below(6));
          Eigen::MatrixXd r(d, d);
          for (Eigen::Index e = 0; e < r.size(); ++e) r(e / d, e % d) = mr.normal();
          const Eigen::MatrixXd s = r * r.transpose();
          const Eigen::MatrixXd q = sqrtm_psd(s);
          worst_sq = std::max(worst_sq, (q * q - s).norm());
        }
        check("matrix_sqrt_squares_back", worst_sq, 1e-10);

        Eigen::MatrixXd centers(2, 2);
        centers << 5, 5, -5, -5;
        const ClusterData blob = gen_clusters(3, centers, 0.3, 60);
        const KmeansResult km = kmeans_reference(blob.xs, 2, 4);
        int mismatch = 0;
        for (int i = 1; i < 30; ++i)
          if (km.labels[static_cast<std::size_t>(i)] != km.labels[0]) ++mismatch;
        for (int i = 31; i < 60; ++i)
          if (km.labels[static_cast<std::size_t>(i)] != km.labels[30]) ++mismatch;
        if (km.labels[0] == km.labels[30]) ++mismatch;
        check("kmeans_two_blobs", static_cast<double>(mismatch), 0.5);
      }

      if (!v_out.empty()) {
        fs::create_directories(v_out);
        json report;
        report["checks"] = checks;
        report["all_pass"] = all_pass;
        write_text(fs::path(v_out) / "validate_report.json", report.dump(2) + "\n");
      }
      return all_pass ? 0 : 2;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

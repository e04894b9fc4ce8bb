#include "mtrl/cli.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "mtrl/asymmetric_solver.hpp"
#include "mtrl/cross_validation.hpp"
#include "mtrl/error.hpp"
#include "mtrl/io.hpp"
#include "mtrl/matrix_ops.hpp"
#include "mtrl/metrics.hpp"
#include "mtrl/priors.hpp"
#include "mtrl/symmetric_solver.hpp"
#include "mtrl/toy.hpp"

namespace mtrl {

namespace {

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

struct ModelFlags {
  double l1 = 0.01;
  double l2 = 0.005;
  std::string kernel = "linear";
  double rbf_width = 1.0;
  double tol = 1e-6;
  int max_iters = 50;
  std::string solver = "auto";
  double omega_eps = 1e-5;

  void add_to(CLI::App* app) {
    app->add_option("--l1", l1, "ridge weight lambda1")->capture_default_str();
    app->add_option("--l2", l2, "task-relationship weight lambda2")->capture_default_str();
    add_common(app);
  }

  void add_common(CLI::App* app) {
    app->add_option("--kernel", kernel, "linear or rbf")
        ->check(CLI::IsMember({"linear", "rbf"}))
        ->capture_default_str();
    app->add_option("--rbf-width", rbf_width, "RBF width s")->capture_default_str();
    app->add_option("--tol", tol, "relative objective change for convergence")->capture_default_str();
    app->add_option("--max-iters", max_iters, "outer iteration cap")->capture_default_str();
    app->add_option("--solver", solver, "direct, smo or auto")
        ->check(CLI::IsMember({"direct", "smo", "auto"}))
        ->capture_default_str();
    app->add_option("--omega-eps", omega_eps, "ridge added to W^T W in the covariance step")
        ->capture_default_str();
  }

  KernelSpec kernel_spec() const {
    KernelSpec k = kernel == "rbf" ? KernelSpec::rbf(rbf_width) : KernelSpec::linear();
    k.validate();
    return k;
  }

  Hyperparams hyperparams() const {
    Hyperparams hp;
    hp.lambda1 = l1;
    hp.lambda2 = l2;
    hp.tol = tol;
    hp.max_iters = max_iters;
    hp.omega_epsilon = omega_eps;
    hp.validate();
    return hp;
  }

  FitOptions fit_options() const {
    FitOptions o;
    o.solver = solver == "direct" ? SolverChoice::Direct
               : solver == "smo"  ? SolverChoice::Smo
                                  : SolverChoice::Auto;
    return o;
  }
};

std::string num(double v) { return fmt::format("{:.6g}", v); }

void print_matrix(std::ostream& out, const std::vector<std::string>& names, const MatrixXd& a) {
  std::size_t w = 8;
  for (const auto& n : names) w = std::max(w, n.size() + 1);
  out << fmt::format("{:<{}}", "", w);
  for (const auto& n : names) out << fmt::format("{:>{}}", n, w);
  out << '\n';
  for (Index i = 0; i < a.rows(); ++i) {
    out << fmt::format("{:<{}}", names[static_cast<std::size_t>(i)], w);
    for (Index j = 0; j < a.cols(); ++j) out << fmt::format("{:>{}.4f}", a(i, j), w);
    out << '\n';
  }
}

// Like correlation_from_covariance, but a task with no variance (an isolated
// task under a prior) shows as nan instead of failing the whole report.
MatrixXd display_correlation(const MatrixXd& omega) {
  const Index m = omega.rows();
  VectorXd scale(m);
  for (Index i = 0; i < m; ++i)
    scale(i) = omega(i, i) > 1e-12 ? 1.0 / std::sqrt(omega(i, i)) : std::numeric_limits<double>::quiet_NaN();
  MatrixXd c = scale.asDiagonal() * omega * scale.asDiagonal();
  for (Index i = 0; i < m; ++i)
    if (omega(i, i) > 1e-12) c(i, i) = 1.0;
  return c;
}

void print_model(std::ostream& out, const TrainedModel& model, const FitOptions& opts) {
  Index total = 0;
  for (Index n : model.task_sizes) total += n;
  const Hyperparams& hp = model.hyperparams;
  out << fmt::format("tasks: {}  points: {}  dim: {}\n", model.num_tasks(), total, model.dim());
  out << fmt::format("kernel: {}", kernel_name(model.kernel.kind));
  if (model.kernel.kind == KernelKind::Rbf) out << fmt::format(" (width {})", num(model.kernel.width));
  out << fmt::format("  lambda1: {}  lambda2: {}  solver: {}\n", num(hp.lambda1), num(hp.lambda2),
                     solver_name(opts.solver));
  out << fmt::format("iterations: {}  converged: {}\n", model.iterations,
                     model.converged ? "yes" : "no");
  out << "objective:";
  for (double j : model.objective_trace) out << ' ' << fmt::format("{:.10g}", j);
  out << '\n';
  out << (model.fixed_inverse ? "correlation (implied by the prior):\n" : "correlation:\n");
  print_matrix(out, model.task_ids, display_correlation(model.omega.matrix()));
  if (model.kernel.kind == KernelKind::Linear) {
    const MatrixXd w = explicit_weights(model);
    out << "weights:\n";
    for (Index i = 0; i < model.num_tasks(); ++i) {
      std::vector<std::string> ws;
      for (Index c = 0; c < w.rows(); ++c) ws.push_back(fmt::format("{:.6f}", w(c, i)));
      out << fmt::format("{}  w=[{}]  b={:.6f}\n", model.task_ids[static_cast<std::size_t>(i)],
                         fmt::join(ws, ", "), model.bias(i));
    }
  }
}

std::vector<std::vector<double>> predictions_by_task(const TrainedModel& model,
                                                     const MultiTaskDataset& ds,
                                                     std::vector<std::vector<double>>* truth) {
  std::vector<std::vector<double>> pred;
  for (Index i = 0; i < ds.num_tasks(); ++i) {
    const TaskData& t = ds.task(i);
    const auto idx = model.find_task(t.id);
    if (!idx) throw Error(ErrorCode::UnknownTask, fmt::format("unknown task '{}'", t.id));
    MatrixXd x(static_cast<Index>(t.inputs.size()), ds.dim());
    for (std::size_t j = 0; j < t.inputs.size(); ++j) x.row(static_cast<Index>(j)) = t.inputs[j].transpose();
    const VectorXd p = predict_batch(model, *idx, x);
    pred.emplace_back(p.data(), p.data() + p.size());
    if (truth) truth->push_back(t.targets);
  }
  return pred;
}

int run(CLI::App& app, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  app.require_subcommand(1);

  // make-toy
  auto* toy = app.add_subcommand("make-toy", "write the three-task toy dataset as CSV");
  std::uint64_t toy_seed = 0;
  double toy_noise = 0.1;
  std::string toy_out;
  toy->add_option("--seed", toy_seed, "random seed")->capture_default_str();
  toy->add_option("--noise", toy_noise, "noise variance")->capture_default_str();
  toy->add_option("-o,--output", toy_out, "output path (default: stdout)");

  // train
  auto* train = app.add_subcommand("train", "fit the model and print the task correlations");
  std::string train_data, train_out;
  ModelFlags train_flags;
  train->add_option("--data", train_data, "training CSV")->required();
  train->add_option("-o,--output", train_out, "model file to write");
  train_flags.add_to(train);

  // prior-train
  auto* prior_train = app.add_subcommand("prior-train", "fit with a fixed task-relationship prior");
  std::string pt_data, pt_out, pt_prior;
  ModelFlags pt_flags;
  prior_train->add_option("--data", pt_data, "training CSV")->required();
  prior_train->add_option("--prior", pt_prior, "prior-spec file")->required();
  prior_train->add_option("-o,--output", pt_out, "model file to write");
  pt_flags.add_to(prior_train);

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "predict with a saved model");
  std::string pr_model, pr_data, pr_task;
  std::vector<double> pr_x;
  predict_cmd->add_option("--model", pr_model, "model file")->required();
  auto* pr_data_opt = predict_cmd->add_option("--data", pr_data, "CSV in dataset format (y ignored)");
  auto* pr_task_opt = predict_cmd->add_option("--task", pr_task, "task id for a single input");
  predict_cmd->add_option("--x", pr_x, "single input, comma separated")->delimiter(',');
  pr_data_opt->excludes(pr_task_opt);

  // eval
  auto* eval = app.add_subcommand("eval", "score a saved model on labelled data");
  std::string ev_model, ev_data;
  bool ev_class = false;
  eval->add_option("--model", ev_model, "model file")->required();
  eval->add_option("--data", ev_data, "labelled CSV")->required();
  eval->add_flag("--classification", ev_class, "report sign error instead of nMSE");

  // cv
  auto* cv = app.add_subcommand("cv", "cross-validate a hyperparameter grid");
  std::string cv_data, cv_prior;
  std::vector<double> cv_l1{0.01}, cv_l2{0.005}, cv_width;
  int cv_folds = 5;
  std::uint64_t cv_seed = 0;
  bool cv_class = false;
  ModelFlags cv_flags;
  cv->add_option("--data", cv_data, "training CSV")->required();
  cv->add_option("--l1", cv_l1, "lambda1 candidates")->delimiter(',')->capture_default_str();
  cv->add_option("--l2", cv_l2, "lambda2 candidates")->delimiter(',')->capture_default_str();
  cv->add_option("--rbf-widths", cv_width, "RBF width candidates")->delimiter(',');
  cv->add_option("--folds", cv_folds, "number of folds")->capture_default_str();
  cv->add_option("--seed", cv_seed, "fold assignment seed")->capture_default_str();
  cv->add_option("--prior", cv_prior, "prior-spec file (fixed-inverse mode)");
  cv->add_flag("--classification", cv_class, "select by sign error instead of nMSE");
  cv_flags.add_common(cv);

  // new-task
  auto* new_task = app.add_subcommand("new-task", "add one task to a trained linear model");
  std::string nt_model, nt_data, nt_step = "exact";
  double nt_l1 = kUnset, nt_l2 = kUnset;
  int nt_max_iters = 50;
  double nt_tol = 1e-6;
  double nt_eps = kUnset;
  new_task->add_option("--model", nt_model, "model file")->required();
  new_task->add_option("--data", nt_data, "CSV holding exactly one task")->required();
  new_task->add_option("--l1", nt_l1, "lambda1 (default: the model's)");
  new_task->add_option("--l2", nt_l2, "lambda2 (default: the model's)");
  new_task->add_option("--omega-eps", nt_eps, "ridge on W~^T W~ (default: the model's)");
  new_task->add_option("--tol", nt_tol, "relative objective change")->capture_default_str();
  new_task->add_option("--max-iters", nt_max_iters, "iteration cap")->capture_default_str();
  new_task->add_option("--omega-step", nt_step, "exact (trace) or socp")
      ->check(CLI::IsMember({"exact", "socp"}))
      ->capture_default_str();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (char& c : msg) {
      if (c == '\n') c = ' ';
    }
    err << "error: InvalidArgument: " << msg << '\n';
    return 2;
  }

  if (*toy) {
    const MultiTaskDataset ds = generate_toy(toy_seed, toy_noise);
    if (toy_out.empty()) {
      write_csv(ds, out);
    } else {
      write_csv(ds, toy_out);
      out << fmt::format("wrote {} ({} tasks, {} points)\n", toy_out, ds.num_tasks(), ds.total_points());
    }
  } else if (*train) {
    const MultiTaskDataset ds = load_csv(train_data);
    const FitOptions opts = train_flags.fit_options();
    const TrainedModel model = fit(ds, train_flags.kernel_spec(), train_flags.hyperparams(), opts);
    print_model(out, model, opts);
    if (!train_out.empty()) save_model(model, train_out);
  } else if (*prior_train) {
    const MultiTaskDataset ds = load_csv(pt_data);
    const FixedInverseCovariance l = build_prior(load_prior_spec(pt_prior), ds.num_tasks());
    const FitOptions opts = pt_flags.fit_options();
    const TrainedModel model =
        fit_with_fixed_inverse(ds, pt_flags.kernel_spec(), pt_flags.hyperparams(), l, opts);
    print_model(out, model, opts);
    if (!pt_out.empty()) save_model(model, pt_out);
  } else if (*predict_cmd) {
    const TrainedModel model = load_model(pr_model);
    if (!pr_data.empty()) {
      const MultiTaskDataset ds = load_csv(pr_data);
      const auto pred = predictions_by_task(model, ds, nullptr);
      out << "task,prediction\n";
      for (Index i = 0; i < ds.num_tasks(); ++i) {
        for (double p : pred[static_cast<std::size_t>(i)]) out << ds.task(i).id << ',' << fmt::format("{}", p) << '\n';
      }
    } else {
      if (pr_task.empty() || pr_x.empty()) {
        throw Error(ErrorCode::InvalidArgument, "predict needs --data, or --task with --x");
      }
      const VectorXd x = Eigen::Map<const VectorXd>(pr_x.data(), static_cast<Index>(pr_x.size()));
      const double y = predict(model, pr_task, x);
      out << "task,prediction\n" << pr_task << ',' << fmt::format("{}", y) << '\n';
    }
  } else if (*eval) {
    const TrainedModel model = load_model(ev_model);
    const MultiTaskDataset ds = load_csv(ev_data);
    std::vector<std::vector<double>> truth;
    const auto pred = predictions_by_task(model, ds, &truth);
    const Metrics m =
        compute_metrics(truth, pred, ev_class ? TaskType::Classification : TaskType::Regression);
    for (Index i = 0; i < ds.num_tasks(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (ev_class) {
        out << fmt::format("{}  error: {:.6f}\n", ds.task(i).id, m.classification_error[k]);
      } else {
        out << fmt::format("{}  nMSE: {:.6f}\n", ds.task(i).id, m.nmse[k]);
      }
    }
    if (m.explained_variance) {
      out << fmt::format("pooled nMSE: {:.6f}  explained variance: {:.4f}%\n", *m.pooled_nmse,
                         *m.explained_variance);
    }
  } else if (*cv) {
    const MultiTaskDataset ds = load_csv(cv_data);
    ExperimentConfig cfg;
    cfg.kernel = cv_flags.kernel_spec();
    cfg.grid = {cv_l1, cv_l2, cv_width};
    cfg.folds = cv_folds;
    cfg.seed = cv_seed;
    cfg.solver = cv_flags.fit_options().solver;
    cfg.task_type = cv_class ? TaskType::Classification : TaskType::Regression;
    cfg.base.tol = cv_flags.tol;
    cfg.base.max_iters = cv_flags.max_iters;
    cfg.base.omega_epsilon = cv_flags.omega_eps;
    if (!cv_prior.empty()) cfg.prior = build_prior(load_prior_spec(cv_prior), ds.num_tasks());
    const CvResult r = cross_validate(cfg, ds);
    out << fmt::format("{} grid points, {} folds, seed {}\n", r.grid.size(), cfg.folds, cfg.seed);
    for (const auto& g : r.grid) {
      out << fmt::format("lambda1={} lambda2={}", num(g.hyperparams.lambda1), num(g.hyperparams.lambda2));
      if (g.kernel.kind == KernelKind::Rbf) out << fmt::format(" rbf_width={}", num(g.kernel.width));
      out << fmt::format("  score={:.6f}\n", g.mean_score);
    }
    out << fmt::format("best: lambda1={} lambda2={}", num(r.best_hyperparams.lambda1),
                       num(r.best_hyperparams.lambda2));
    if (r.best_kernel.kind == KernelKind::Rbf) out << fmt::format(" rbf_width={}", num(r.best_kernel.width));
    out << '\n';
  } else if (*new_task) {
    const TrainedModel model = load_model(nt_model);
    const MultiTaskDataset ds = load_csv(nt_data);
    if (ds.num_tasks() != 1) {
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("new-task data must hold one task, found {}", ds.num_tasks()));
    }
    Hyperparams hp = model.hyperparams;
    if (!std::isnan(nt_l1)) hp.lambda1 = nt_l1;
    if (!std::isnan(nt_l2)) hp.lambda2 = nt_l2;
    if (!std::isnan(nt_eps)) hp.omega_epsilon = nt_eps;
    hp.tol = nt_tol;
    hp.max_iters = nt_max_iters;
    NewTaskOptions opts;
    opts.method = nt_step == "socp" ? OmegaStepMethod::Socp : OmegaStepMethod::Exact;
    const NewTaskSolution sol = incorporate_new_task(model, ds.task(0), hp, opts);
    std::vector<std::string> ws;
    for (Index c = 0; c < sol.w.size(); ++c) ws.push_back(fmt::format("{:.6f}", sol.w(c)));
    out << fmt::format("task: {}  omega step: {}\n", ds.task(0).id, nt_step);
    out << fmt::format("iterations: {}  converged: {}\n", sol.iterations, sol.converged ? "yes" : "no");
    out << "objective:";
    for (double j : sol.objective_trace) out << ' ' << fmt::format("{:.10g}", j);
    out << '\n';
    out << fmt::format("w=[{}]  b={:.6f}\n", fmt::join(ws, ", "), sol.b);
    out << fmt::format("sigma: {:.6f}\n", sol.sigma);
    out << "task  covariance  correlation\n";
    for (Index i = 0; i < model.num_tasks(); ++i) {
      out << fmt::format("{}  {:.6f}  {:.4f}\n", model.task_ids[static_cast<std::size_t>(i)],
                         sol.omega_col(i), new_task_correlation(sol, model.omega, i));
    }
  }
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-task relationship learning"};
  app.name("mtrl");
  try {
    return run(app, args, out, err);
  } catch (const Error& e) {
    std::string msg = e.what();
    for (char& c : msg) {
      if (c == '\n') c = ' ';
    }
    err << "error: " << e.name() << ": " << msg << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: Internal: " << e.what() << '\n';
    return 1;
  }
}

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_main(args, out, err);
}

}  // namespace mtrl

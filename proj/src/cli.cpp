#include "counterclr/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "counterclr/baselines.hpp"
#include "counterclr/checkpoint.hpp"
#include "counterclr/error.hpp"
#include "counterclr/metrics.hpp"
#include "counterclr/objective.hpp"
#include "counterclr/simulator.hpp"
#include "counterclr/sweep.hpp"
#include "counterclr/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace counterclr {

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + " is not valid JSON: " + e.what());
  }
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::size_t users = 200;
  std::size_t items = 300;
  std::size_t rank = 8;
  double noise = 0.5;
  double slope = 2.0;
  double ratio = 0.1;
  std::uint64_t seed = 7;
  double r_min = 1.0;
  double r_max = 5.0;
  std::string out;
};

void cmd_synth(const SynthArgs& a, std::ostream& log) {
  if (!(a.ratio > 0.0 && a.ratio <= 1.0)) throw ArgumentError("--ratio must lie in (0, 1]");
  const RatingScale scale(a.r_min, a.r_max);
  const auto gt = generate_ground_truth(a.users, a.items, a.rank, a.noise, scale, a.seed);
  const auto policy = calibrate_policy(gt, a.slope, a.ratio);
  const auto sample = sample_observations(gt, policy, a.seed);

  const fs::path dir(a.out);
  ensure_dir(dir);
  save_dense_matrix(gt.full_matrix, gt.n_users, gt.n_items, dir / "ground_truth.txt");
  save_triples(sample.observed, dir / "observed.tsv");
  save_triples(sample.unobserved, dir / "test.tsv");
  json manifest = {
      {"n_users", a.users},
      {"n_items", a.items},
      {"scale", {{"r_min", scale.r_min}, {"r_max", scale.r_max}}},
      {"generator", {{"rank", a.rank}, {"noise_std", a.noise}, {"seed", a.seed}}},
      {"exposure",
       {{"slope", policy.slope},
        {"intercept", std::isfinite(policy.intercept) ? json(policy.intercept) : json("inf")},
        {"target_ratio", policy.target_ratio},
        {"expected_ratio", expected_ratio(gt, policy)}}},
      {"counts", {{"observed", sample.observed.size()}, {"test", sample.unobserved.size()}}},
      {"files",
       {{"ground_truth", "ground_truth.txt"},
        {"observed", "observed.tsv"},
        {"test", "test.tsv"}}},
      {"ids", "sequential"}};
  write_text(dir / "manifest.json", manifest.dump(1) + "\n");
  log << "wrote " << sample.observed.size() << " observed and "
      << sample.unobserved.size() << " test ratings to " << dir.string() << "\n";
}

// ---------------------------------------------------------------- data

struct DataArgs {
  std::string data_dir;
  std::string train_path;
  bool coat = false;
  double r_min = 1.0;
  double r_max = 5.0;
};

InteractionDataset load_training_data(const DataArgs& a) {
  if (!a.data_dir.empty()) {
    const fs::path dir(a.data_dir);
    const auto manifest_path = dir / "manifest.json";
    if (fs::exists(manifest_path)) {
      const auto m = read_json(manifest_path);
      try {
        const RatingScale scale(m.at("scale").at("r_min").get<double>(),
                                m.at("scale").at("r_max").get<double>());
        return load_triples(dir / "observed.tsv", scale,
                            IdMap::sequential(m.at("n_users").get<std::size_t>()),
                            IdMap::sequential(m.at("n_items").get<std::size_t>()));
      } catch (const json::exception& e) {
        throw ParseError("malformed manifest: " + std::string(e.what()));
      }
    }
    return load_triples(dir / "observed.tsv", RatingScale(a.r_min, a.r_max));
  }
  if (a.train_path.empty()) throw ArgumentError("one of --data or --train is required");
  const RatingScale scale(a.r_min, a.r_max);
  return a.coat ? load_coat_matrix(a.train_path, scale) : load_triples(a.train_path, scale);
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string method = "counterclr";
  std::string config;
  DataArgs data;
  std::string out;
  double val_fraction = 0.1;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<double> learning_rate;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<std::size_t> K;
  std::optional<std::size_t> batch_size;
  std::optional<double> weight_decay;
};

TrainConfig resolve_config(const std::string& path, const TrainArgs* overrides) {
  TrainConfig cfg = path.empty() ? TrainConfig{} : load_config(path);
  if (overrides) {
    const auto& o = *overrides;
    if (o.seed) cfg.seed = *o.seed;
    if (o.epochs) cfg.epochs = *o.epochs;
    if (o.learning_rate) cfg.learning_rate = *o.learning_rate;
    if (o.alpha) cfg.alpha = *o.alpha;
    if (o.beta) cfg.beta = *o.beta;
    if (o.K) cfg.K = *o.K;
    if (o.batch_size) cfg.batch_size = *o.batch_size;
    if (o.weight_decay) cfg.weight_decay = *o.weight_decay;
  }
  cfg.validate();
  return cfg;
}

std::string report_csv(const TrainReport& report, const TrainConfig& cfg) {
  std::ostringstream os;
  os << "# method=" << report.method << " config=" << config_to_json(cfg).dump() << "\n";
  os << "epoch,l_base,l_pro,l_con,total,val_mse,val_mae,best\n";
  for (const auto& e : report.epochs) {
    os << e.epoch << ',' << format_double(e.base) << ',' << format_double(e.propensity)
       << ',' << format_double(e.contrastive) << ',' << format_double(e.total) << ','
       << format_double(e.val_mse) << ',' << format_double(e.val_mae) << ','
       << (e.epoch == report.best_epoch ? 1 : 0) << '\n';
  }
  return os.str();
}

void cmd_train(const TrainArgs& a, std::ostream& log) {
  const auto method = parse_method(a.method);
  const auto cfg = resolve_config(a.config, &a);
  const auto ds = load_training_data(a.data);
  const auto data = split(ds, a.val_fraction, cfg.seed);

  Checkpoint ckpt{to_string(method), MfModel{}, ds.scale(), ds.users(), ds.items(),
                  cfg, 0, 0.0, 0};
  TrainReport report;
  if (method == Method::kCounterClr) {
    auto run = train_counterclr(data, cfg);
    ckpt.model = std::move(run.model);
    report = std::move(run.report);
  } else {
    const auto baseline = static_cast<BaselineMethod>(static_cast<int>(method) - 1);
    auto run = train_baseline(baseline, data.train, data.validation, cfg);
    ckpt.model = std::move(run.model);
    report = std::move(run.report);
  }
  ckpt.best_epoch = report.best_epoch;
  ckpt.best_val_mse = report.best_val_mse;
  ckpt.steps = report.steps;

  const fs::path dir(a.out);
  ensure_dir(dir);
  save_checkpoint(ckpt, dir / "checkpoint.json");
  write_text(dir / "report.csv", report_csv(report, cfg));
  write_text(dir / "config.json", config_to_json(cfg).dump(1) + "\n");
  log << report.method << ": " << report.epochs.size() << " epochs, best epoch "
      << report.best_epoch << ", validation MSE " << format_double(report.best_val_mse)
      << "\n";
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string checkpoint;
  std::string test;
  std::string out;
  std::string dataset = "unnamed";
};

std::string eval_csv_header() {
  return "method,dataset,mse,mae,ndcg_at_5,n_users_ranked,n_test,ndcg_gain,config";
}

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto ckpt = load_checkpoint(a.checkpoint);
  auto users = ckpt.users;
  auto items = ckpt.items;
  const auto test = load_triples(a.test, ckpt.scale, users, items);
  if (test.n_users() != ckpt.users.size() || test.n_items() != ckpt.items.size()) {
    throw ParseError("test file contains ids unknown to the checkpoint");
  }
  const auto report = evaluate(ckpt, test);
  std::ostringstream row;
  row << ckpt.method << ',' << csv_escape(a.dataset) << ',' << format_double(report.mse)
      << ',' << format_double(report.mae) << ',' << format_double(report.ndcg_at_5) << ','
      << report.n_users_ranked << ',' << test.size() << ','
      << report.metadata.at("ndcg_gain") << ','
      << csv_escape(config_to_json(ckpt.config).dump());
  const std::string text = eval_csv_header() + "\n" + row.str() + "\n";
  if (a.out.empty()) {
    out << text;
  } else {
    write_text(a.out, text);
  }
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  std::size_t instances = 20;
  std::size_t users = 5;
  std::size_t items = 6;
  std::size_t K = 3;
  std::string mode = "mf";
  double alpha = 1.0;
  double beta = 1.0;
  double temperature = 0.07;
  double tau = 1.0;
  double step = 1e-5;
  double rel_tol = 1e-4;
  std::uint64_t seed = 0;
  std::string inject_fault;
};

bool cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  EncoderConfig enc;
  enc.mode = parse_encoder_mode(a.mode);
  LossSpec spec;
  spec.alpha = a.alpha;
  spec.beta = a.beta;
  spec.temperature = a.temperature;
  spec.tau = a.tau;
  std::function<void(GradientMap&)> fault;
  if (!a.inject_fault.empty()) {
    fault = [&](GradientMap& g) {
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (g.name(k) == a.inject_fault && g.has(k)) {
          for (auto& v : g[k]) v = -v;
          return;
        }
      }
      throw ArgumentError("--inject-fault: no trainable block named " + a.inject_fault);
    };
  }
  bool all_passed = true;
  for (std::size_t n = 0; n < a.instances; ++n) {
    const auto inst = random_gradcheck_instance(a.seed + n, a.users, a.items, a.K, enc);
    const ObservationIndex index(inst.train);
    const auto report = check_objective_gradients(inst.net, index, inst.batch, spec,
                                                  a.step, a.rel_tol, fault);
    out << "instance " << n << ": " << (report.passed ? "pass" : "FAIL") << "\n";
    for (const auto& b : report.blocks) {
      out << "  " << b.name << " max_rel_error=" << b.max_rel_error
          << (b.passed ? "" : "  <-- exceeds rel_tol") << "\n";
    }
    if (!report.passed) {
      out << "  offending block: " << report.first_failure() << "\n";
      all_passed = false;
    }
  }
  out << (all_passed ? "gradcheck: PASS" : "gradcheck: FAIL") << "\n";
  return all_passed;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  std::size_t users = 200;
  std::size_t items = 300;
  std::size_t rank = 8;
  double noise = 0.5;
  double slope = 2.0;
  std::uint64_t gt_seed = 7;
  double r_min = 1.0;
  double r_max = 5.0;
  std::vector<double> ratios{0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<std::string> methods{"counterclr", "naive"};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string config;
  std::size_t threads = 1;
  std::string out;
};

void cmd_sweep(const SweepArgs& a, std::ostream& out) {
  const auto cfg = resolve_config(a.config, nullptr);
  std::vector<Method> methods;
  for (const auto& m : a.methods) methods.push_back(parse_method(m));
  const RatingScale scale(a.r_min, a.r_max);
  const auto gt = generate_ground_truth(a.users, a.items, a.rank, a.noise, scale, a.gt_seed);
  SweepOptions opts;
  opts.slope = a.slope;
  opts.threads = a.threads;
  const auto cells = sparsity_sweep(gt, a.ratios, methods, a.seeds, cfg, opts);
  std::ostringstream os;
  os << "# config=" << config_to_json(cfg).dump() << " users=" << a.users
     << " items=" << a.items << " rank=" << a.rank << " noise=" << format_double(a.noise)
     << " slope=" << format_double(a.slope) << " gt_seed=" << a.gt_seed << "\n";
  os << sweep_csv_header() << "\n";
  for (const auto& c : cells) os << sweep_csv_row(c, opts.dataset) << "\n";
  if (a.out.empty()) {
    out << os.str();
  } else {
    write_text(a.out, os.str());
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Debiased rating prediction with causal contrastive learning"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate ground truth and MNAR observations");
  s->add_option("--users", synth.users);
  s->add_option("--items", synth.items);
  s->add_option("--rank", synth.rank);
  s->add_option("--noise", synth.noise);
  s->add_option("--slope", synth.slope);
  s->add_option("--ratio", synth.ratio);
  s->add_option("--seed", synth.seed);
  s->add_option("--r-min", synth.r_min);
  s->add_option("--r-max", synth.r_max);
  s->add_option("--out", synth.out, "Output directory")->required();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train CounterCLR or a baseline");
  t->add_option("--method", train.method, "counterclr, naive, ips, snips, dr");
  t->add_option("--config", train.config, "JSON config file");
  t->add_option("--data", train.data.data_dir, "Directory written by synth");
  t->add_option("--train", train.data.train_path, "Triples file (or Coat matrix with --coat)");
  t->add_flag("--coat", train.data.coat);
  t->add_option("--r-min", train.data.r_min);
  t->add_option("--r-max", train.data.r_max);
  t->add_option("--out", train.out, "Run directory")->required();
  t->add_option("--val-fraction", train.val_fraction);
  t->add_option("--seed", train.seed);
  t->add_option("--epochs", train.epochs);
  t->add_option("--learning-rate", train.learning_rate);
  t->add_option("--alpha", train.alpha);
  t->add_option("--beta", train.beta);
  t->add_option("--K", train.K);
  t->add_option("--batch-size", train.batch_size);
  t->add_option("--weight-decay", train.weight_decay);

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on held-out triples");
  e->add_option("--checkpoint", eval.checkpoint)->required();
  e->add_option("--test", eval.test)->required();
  e->add_option("--out", eval.out, "CSV path (stdout when omitted)");
  e->add_option("--dataset", eval.dataset);

  GradcheckArgs grad;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference check of the full objective");
  g->add_option("--instances", grad.instances);
  g->add_option("--users", grad.users);
  g->add_option("--items", grad.items);
  g->add_option("--K", grad.K);
  g->add_option("--mode", grad.mode);
  g->add_option("--alpha", grad.alpha);
  g->add_option("--beta", grad.beta);
  g->add_option("--temperature", grad.temperature);
  g->add_option("--tau", grad.tau);
  g->add_option("--step", grad.step);
  g->add_option("--rel-tol", grad.rel_tol);
  g->add_option("--seed", grad.seed);
  g->add_option("--inject-fault", grad.inject_fault, "Flip the sign of this block's gradient");

  SweepArgs sweep;
  auto* w = app.add_subcommand("sweep", "Observed-ratio sweep on synthetic data");
  w->add_option("--users", sweep.users);
  w->add_option("--items", sweep.items);
  w->add_option("--rank", sweep.rank);
  w->add_option("--noise", sweep.noise);
  w->add_option("--slope", sweep.slope);
  w->add_option("--gt-seed", sweep.gt_seed);
  w->add_option("--r-min", sweep.r_min);
  w->add_option("--r-max", sweep.r_max);
  w->add_option("--ratios", sweep.ratios)->delimiter(',');
  w->add_option("--methods", sweep.methods)->delimiter(',');
  w->add_option("--seeds", sweep.seeds)->delimiter(',');
  w->add_option("--config", sweep.config);
  w->add_option("--threads", sweep.threads);
  w->add_option("--out", sweep.out, "CSV path (stdout when omitted)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& ex) {
    err << "usage error: " << ex.what() << "\n" << app.help();
    return static_cast<int>(ExitCode::kUsage);
  }

  try {
    if (s->parsed()) {
      cmd_synth(synth, err);
    } else if (t->parsed()) {
      cmd_train(train, err);
    } else if (e->parsed()) {
      cmd_eval(eval, out);
    } else if (g->parsed()) {
      if (!cmd_gradcheck(grad, out)) return static_cast<int>(ExitCode::kNumerical);
    } else if (w->parsed()) {
      cmd_sweep(sweep, out);
    }
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return static_cast<int>(ex.code());
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return static_cast<int>(ExitCode::kIo);
  }
  return 0;
}

}  // namespace counterclr

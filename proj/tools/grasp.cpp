#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "grasp/array_io.hpp"
#include "grasp/checkpoint.hpp"
#include "grasp/composition.hpp"
#include "grasp/gnn.hpp"
#include "grasp/metrics.hpp"
#include "grasp/run_config.hpp"
#include "grasp/semantics.hpp"
#include "grasp/token_graph.hpp"
#include "grasp/training.hpp"

#ifndef GRASP_VERSION
#define GRASP_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace grasp;

namespace {

struct Invocation {
  std::map<std::string, std::string> flags;
  std::string config_path;
};

std::string flag_name(const std::string& key) {
  std::string s = key;
  for (char& c : s)
    if (c == '_') c = '-';
  return "--" + s;
}

// Registers --some-key for config key some_key; the value lands in inv.flags.
void bind(CLI::App* app, Invocation& inv, const std::string& key) {
  std::string help;
  for (const auto& k : RunConfig::schema())
    if (key == k.name) help = k.help;
  app->add_option_function<std::string>(
      flag_name(key), [&inv, key](const std::string& v) { inv.flags[key] = v; }, help);
}

void bind_all(CLI::App* app, Invocation& inv, std::initializer_list<const char*> keys) {
  for (const char* k : keys) bind(app, inv, k);
}

RunConfig resolve(const Invocation& inv) {
  RunConfig cfg;
  cfg.apply_environment();
  if (!inv.config_path.empty()) cfg.load_file(inv.config_path);
  for (const auto& [k, v] : inv.flags) cfg.set(k, v);
  return cfg;
}

fs::path require_path(const RunConfig& cfg, const std::string& key) {
  const std::string& v = cfg.get(key);
  if (v.empty()) throw UsageError("missing required setting " + flag_name(key));
  return v;
}

fs::path prepare_out(const RunConfig& cfg) {
  const fs::path out = require_path(cfg, "out");
  fs::create_directories(out);
  write_text(out / "config.resolved", cfg.resolved_text());
  return out;
}

GraphConfig graph_config(const RunConfig& cfg) {
  GraphConfig g;
  g.use_semantic = cfg.get_bool("use_semantic");
  g.k = cfg.get_int("knn");
  g.connect_cls = cfg.get_bool("connect_cls");
  return g;
}

ModelDims model_dims(const RunConfig& cfg) {
  ModelDims d;
  d.hidden = cfg.get_int("hidden");
  d.depth = cfg.get_int("depth");
  d.heads = cfg.get_int("heads");
  d.dropout = cfg.get_double("dropout");
  return d;
}

EmbeddingTensor<float> read_embedding(const fs::path& path) {
  EmbeddingTensor<float> e = read_array(path).to_matrix<float>();
  if (e.rows() != kNumTokens) throw DataError(path.string() + ": expected " + std::to_string(kNumTokens) + " tokens");
  return e;
}

Eigen::VectorXd read_vector(const fs::path& path) {
  const MatrixXd m = read_array(path).to_matrix<double>();
  if (m.rows() != 1 && m.cols() != 1) throw DataError(path.string() + ": expected a vector");
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string metric_header() {
  std::string h;
  h += "# thresholds = " + std::to_string(kThresholds) + " (k/255)\n";
  h += "# f_beta_sq = " + fmt(kFBetaSq) + "\n";
  h += "# fbw_kernel = " + std::to_string(kFbwKernelSize) + "x" + std::to_string(kFbwKernelSize) +
       " sigma " + fmt(kFbwKernelSigma) + "\n";
  h += "# fbw_beta_sq = " + fmt(kFbwBetaSq) + "\n";
  h += "# fbw_alpha = " + fmt(kFbwAlpha) + "\n";
  return h;
}

// ---- subcommands -----------------------------------------------------------

int cmd_graph(const RunConfig& cfg) {
  const auto e = read_embedding(require_path(cfg, "emb"));
  const TokenGraph g = build_graph(e, graph_config(cfg));
  const fs::path out = prepare_out(cfg);
  std::string text;
  for (const auto& [i, j] : g.edges()) text += std::to_string(i) + " " + std::to_string(j) + "\n";
  write_text(out / "edges.txt", text);
  std::cout << "nodes " << g.num_nodes() << " edges " << g.edges().size() << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  TrainConfig tc;
  tc.variant = parse_variant(cfg.get("variant"));
  tc.dims = model_dims(cfg);
  tc.graph = graph_config(cfg);
  tc.adam.lr = cfg.get_double("lr");
  tc.epochs = cfg.get_int("epochs");
  tc.batch_size = cfg.get_int("batch_size");
  tc.seed = cfg.get_u64("seed");
  tc.val_fraction = cfg.get_double("val_fraction");
  tc.patience = cfg.get_int("patience");
  tc.threads = cfg.get_int("threads");
  const DatasetManifest manifest = load_manifest(require_path(cfg, "manifest"));
  const fs::path out = prepare_out(cfg);

  const TrainResult r = train(manifest, tc);
  save_checkpoint(out / "checkpoint.grsp", r.best);
  write_text(out / "train_log.csv", format_train_log(r.log));
  std::cout << "epochs " << r.epochs_run << " best_epoch " << r.best.meta.epoch << " best_val_fmax "
            << fmt(r.best.meta.best_val_fmax) << "\n";
  return 0;
}

int cmd_infer(const RunConfig& cfg) {
  const Checkpoint ckpt = load_checkpoint(require_path(cfg, "checkpoint"));
  const auto e = read_embedding(require_path(cfg, "emb"));
  const SaliencyMap s = predict(ckpt, e, cfg.get_int("height"), cfg.get_int("width"));
  const fs::path out = prepare_out(cfg);
  write_saliency_pgm(out / "saliency.pgm", s);
  return 0;
}

std::string report_row(const std::string& name, const SaliencyReport& r) {
  return name + "," + std::to_string(r.count) + "," + fmt(r.mae) + "," + fmt(r.f_max) + "," + fmt(r.e_max) + "," +
         fmt(r.fbw) + "," + std::to_string(r.skipped_empty_gt) + "\n";
}

void print_table_row(const std::string& name, const SaliencyReport& r) {
  std::printf("%-10s %8.4f %8.4f %8.4f %8.4f\n", name.c_str(), r.mae, r.f_max, r.e_max, r.fbw);
}

int cmd_sal_eval(const RunConfig& cfg) {
  const auto checkpoints = cfg.get_list("checkpoint");
  const bool have_pairs = !cfg.get("pairs").empty();
  if (have_pairs == !checkpoints.empty())
    throw UsageError("sal-eval takes either --pairs or --checkpoint with --manifest");

  std::string report = metric_header() + "model,count,mae,f_max,e_max,fbw,skipped_empty_gt\n";
  std::string per_sample = "model,index,mae,f_max,e_max,fbw\n";
  std::printf("%-10s %8s %8s %8s %8s\n", "model", "MAE", "F-max", "E-max", "Fbw");

  auto sample_row = [&](const std::string& name, std::size_t i, const SaliencyMap& s, const SaliencyMap& g) {
    const bool has_fg = (g.array() >= 0.5).any();
    per_sample += name + "," + std::to_string(i) + "," + fmt(mae(s, g)) + "," +
                  (has_fg ? fmt(f_max(s, g)) : "nan") + "," + fmt(e_max(s, g)) + "," +
                  (has_fg ? fmt(fbw(s, g)) : "nan") + "\n";
  };

  if (have_pairs) {
    const auto table = read_path_table(require_path(cfg, "pairs"), 2, 2);
    if (table.empty()) throw DataError("empty pair list");
    SaliencyEvaluator ev;
    for (std::size_t i = 0; i < table.size(); ++i) {
      const SaliencyMap s = read_mask(table[i][0]);
      const SaliencyMap g = read_mask(table[i][1]);
      ev.add(s, g);
      sample_row("pairs", i, s, g);
    }
    const SaliencyReport r = ev.report();
    report += report_row("pairs", r);
    print_table_row("pairs", r);
  } else {
    const Split split = parse_split(cfg.get("split"));
    const auto entries = load_manifest(require_path(cfg, "manifest")).with_split(split);
    if (entries.empty()) throw DataError("empty manifest: no " + cfg.get("split") + " entries");
    const auto samples = load_samples(entries);
    std::map<std::string, double> fmax_by_variant;
    for (const auto& path : checkpoints) {
      const Checkpoint ckpt = load_checkpoint(path);
      const std::string name = variant_name(ckpt.variant);
      SaliencyEvaluator ev;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& g = samples[i].gt;
        const SaliencyMap s = predict(ckpt, samples[i].tokens, static_cast<int>(g.rows()), static_cast<int>(g.cols()));
        ev.add(s, g);
        sample_row(name, i, s, g);
      }
      const SaliencyReport r = ev.report();
      report += report_row(name, r);
      print_table_row(name, r);
      fmax_by_variant[name] = r.f_max;
    }
    if (fmax_by_variant.count("sage") && fmax_by_variant.count("gcn")) {
      const bool ok = fmax_by_variant["sage"] >= fmax_by_variant["gcn"];
      std::cerr << "expectation sage F-max >= gcn F-max: " << (ok ? "holds" : "does not hold") << " ("
                << fmt(fmax_by_variant["sage"]) << " vs " << fmt(fmax_by_variant["gcn"]) << ")\n";
    }
  }
  const fs::path out = prepare_out(cfg);
  write_text(out / "report.csv", report);
  write_text(out / "per_sample.csv", per_sample);
  return 0;
}

int cmd_blend(const RunConfig& cfg) {
  const ImageBuffer fg = read_image(require_path(cfg, "fg"));
  const ImageBuffer bg = read_image(require_path(cfg, "bg"));
  const SaliencyMap s = read_mask(require_path(cfg, "saliency"));
  const ImageBuffer blended = mask_blend(fg, bg, s);
  const fs::path out = prepare_out(cfg);
  write_image(out / (blended.channels == 3 ? "blend.ppm" : "blend.pgm"), blended);
  return 0;
}

int cmd_inpaint_mask(const RunConfig& cfg) {
  const SaliencyMap s = read_mask(require_path(cfg, "saliency"));
  const BinaryMask m = inpaint_mask(s, cfg.get_double("theta"), cfg.get_int("dilate"));
  const fs::path out = prepare_out(cfg);
  write_mask_pgm(out / "inpaint_mask.pgm", m);
  return 0;
}

int cmd_rank(const RunConfig& cfg) {
  CandidateSet cs;
  cs.config.lambda_clip = cfg.get_double("lambda_clip");
  cs.config.lambda_mask = cfg.get_double("lambda_mask");
  cs.config.theta = cfg.get_double("theta");
  cs.config.consistency = parse_consistency(cfg.get("consistency"));
  cs.reference_saliency = read_mask(require_path(cfg, "saliency"));
  cs.text_vec = read_vector(require_path(cfg, "text_vec"));
  for (const auto& row : read_path_table(require_path(cfg, "candidates"), 2, 3)) {
    Candidate c;
    c.image = read_image(row[0]);
    c.clip_vec = read_vector(row[1]);
    if (c.clip_vec.size() != cs.text_vec.size())
      throw DataError(row[1].string() + ": dimension differs from the text vector");
    if (row.size() == 3) c.mask = read_mask(row[2]);
    cs.candidates.push_back(std::move(c));
  }
  const RankResult r = rank(cs);
  const fs::path out = prepare_out(cfg);
  write_text(out / "rank.csv", format_rank_csv(r));
  std::string meta = "index,fallback_mask\n";
  for (std::size_t i = 0; i < r.scores.size(); ++i)
    meta += std::to_string(i) + "," + (r.scores[i].fallback_mask ? "1" : "0") + "\n";
  write_text(out / "rank_meta.txt", meta);
  std::cout << "best " << r.order.front() << "\n";
  return 0;
}

int cmd_cues_fit(const RunConfig& cfg) {
  const DatasetManifest manifest = load_manifest(require_path(cfg, "manifest"));
  std::vector<Eigen::VectorXd> xs, ys;
  for (const auto& e : manifest.with_split(Split::Train)) {
    if (!e.caption) continue;
    xs.push_back(pool(read_embedding(e.embedding)));
    ys.push_back(read_vector(*e.caption));
  }
  if (xs.empty()) throw DataError("empty manifest: no train entries with caption vectors");
  MatrixXd x(xs.size(), xs.front().size()), y(ys.size(), ys.front().size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (ys[i].size() != y.cols()) throw DataError("caption vectors differ in dimension");
    x.row(static_cast<Eigen::Index>(i)) = xs[i].transpose();
    y.row(static_cast<Eigen::Index>(i)) = ys[i].transpose();
  }
  const ProjectionMap p = fit_projection(x, y, cfg.get_double("lambda"));
  const fs::path out = prepare_out(cfg);
  write_array(out / "projection.npy", DenseArray::from_matrix(p.weight));
  std::cout << "samples " << p.samples << " residual " << fmt(p.residual) << "\n";
  return 0;
}

int cmd_cues_extract(const RunConfig& cfg) {
  const auto e = read_embedding(require_path(cfg, "emb"));
  ProjectionMap p;
  p.weight = read_array(require_path(cfg, "projection")).to_matrix<double>();
  const Vocabulary vocab = Vocabulary::load(require_path(cfg, "vocab_terms"), require_path(cfg, "vocab_vectors"));
  const int k = cfg.get_int("k");
  if (k < 1) throw UsageError("--k must be positive");
  const auto cues = extract_cues(e, p, vocab, static_cast<std::size_t>(k));
  const fs::path out = prepare_out(cfg);
  std::string csv = "rank,index,term,cosine\n";
  for (std::size_t i = 0; i < cues.size(); ++i)
    csv += std::to_string(i + 1) + "," + std::to_string(cues[i].index) + "," + cues[i].term + "," +
           fmt(cues[i].cosine) + "\n";
  write_text(out / "cues.csv", csv);
  const std::string prompt = assemble_prompt(cues);
  write_text(out / "prompt.txt", prompt + "\n");
  std::cout << prompt << "\n";
  return 0;
}

struct FeatureSpec {
  std::string name;
  fs::path recon, gt;
};

FeatureSpec parse_feature(const std::string& s) {
  const auto a = s.find(':');
  const auto b = a == std::string::npos ? a : s.find(':', a + 1);
  if (b == std::string::npos) throw UsageError("feature spec '" + s + "' is not NAME:RECON.npy:GT.npy");
  return {s.substr(0, a), s.substr(a + 1, b - a - 1), s.substr(b + 1)};
}

int cmd_recon_eval(const RunConfig& cfg) {
  std::string report = "# recon_size = " + std::to_string(kReconSize) + "x" + std::to_string(kReconSize) + "\n";
  report += "# ssim_window = " + std::to_string(kSsimWindow) + " sigma " + fmt(kSsimSigma) + " c1 " + fmt(kSsimC1) +
            " c2 " + fmt(kSsimC2) + "\n";
  report += "# distance = mean over rows of 1 - pearson(recon_i, gt_i)\n";
  report += "metric,value,count\n";
  std::string per_sample = "index,pixcorr,ssim\n";
  bool any = false;

  if (!cfg.get("pairs").empty()) {
    const auto table = read_path_table(cfg.get("pairs"), 2, 2);
    if (table.empty()) throw DataError("empty pair list");
    double pc = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < table.size(); ++i) {
      const ImageBuffer recon = read_image(table[i][0]);
      const ImageBuffer gt = read_image(table[i][1]);
      const double p = pixcorr(recon, gt), s = ssim(recon, gt);
      pc += p;
      ss += s;
      per_sample += std::to_string(i) + "," + fmt(p) + "," + fmt(s) + "\n";
    }
    const double n = static_cast<double>(table.size());
    report += "pixcorr," + fmt(pc / n) + "," + std::to_string(table.size()) + "\n";
    report += "ssim," + fmt(ss / n) + "," + std::to_string(table.size()) + "\n";
    any = true;
  }
  for (const auto& spec : cfg.get_list("feature")) {
    const FeatureSpec f = parse_feature(spec);
    const MatrixXd r = read_array(f.recon).to_matrix<double>(), g = read_array(f.gt).to_matrix<double>();
    report += f.name + "_2way," + fmt(two_way_identification(r, g)) + "," + std::to_string(r.rows()) + "\n";
    any = true;
  }
  for (const auto& spec : cfg.get_list("distance")) {
    const FeatureSpec f = parse_feature(spec);
    const MatrixXd r = read_array(f.recon).to_matrix<double>(), g = read_array(f.gt).to_matrix<double>();
    report += f.name + "_distance," + fmt(mean_correlation_distance(r, g)) + "," + std::to_string(r.rows()) + "\n";
    any = true;
  }
  if (!any) throw UsageError("recon-eval needs --pairs, --feature or --distance");
  const fs::path out = prepare_out(cfg);
  write_text(out / "report.csv", report);
  if (!cfg.get("pairs").empty()) write_text(out / "per_sample.csv", per_sample);
  std::cout << report;
  return 0;
}

int cmd_gradcheck(const RunConfig& cfg) {
  const Variant v = parse_variant(cfg.get("variant"));
  const std::uint64_t seed = cfg.get_u64("seed");
  const int seeds = cfg.get_int("seeds");
  if (seeds < 1) throw UsageError("--seeds must be positive");
  bool all = true;
  std::string csv = "variant,seed,num_params,max_rel_err,max_abs_err,passed\n";
  for (int i = 0; i < seeds; ++i) {
    const GradCheckReport r = grad_check(v, seed + static_cast<std::uint64_t>(i));
    std::printf("%s seed %llu params %zu max_rel_err %.3e max_abs_err %.3e %s\n", variant_name(r.variant),
                static_cast<unsigned long long>(r.seed), r.num_params, r.max_rel_err, r.max_abs_err,
                r.passed ? "PASS" : "FAIL");
    csv += std::string(variant_name(r.variant)) + "," + std::to_string(r.seed) + "," + std::to_string(r.num_params) +
           "," + fmt(r.max_rel_err) + "," + fmt(r.max_abs_err) + "," + (r.passed ? "1" : "0") + "\n";
    all = all && r.passed;
  }
  if (!cfg.get("out").empty()) write_text(prepare_out(cfg) / "gradcheck.csv", csv);
  return all ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Saliency priors from token embeddings: graph models, composition and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string("grasp ") + GRASP_VERSION + " (npy 1.0, checkpoint v" +
                                        std::to_string(kCheckpointVersion) + ", pgm/ppm maxval 255)");
  Invocation inv;
  app.add_option("--config", inv.config_path, "settings file with `key = value` lines");
  bind_all(&app, inv, {"seed", "threads", "out"});

  std::function<int(const RunConfig&)> handler;
  auto command = [&](CLI::App* parent, const char* name, const char* help, int (*fn)(const RunConfig&)) {
    CLI::App* sub = parent->add_subcommand(name, help);
    sub->callback([&handler, fn] { handler = fn; });
    return sub;
  };

  const std::initializer_list<const char*> graph_keys = {"use_semantic", "knn", "connect_cls"};
  const std::initializer_list<const char*> model_keys = {"variant", "hidden", "depth", "heads", "dropout"};

  auto* graph = command(&app, "graph", "dump the token graph of one embedding as `i j` lines", cmd_graph);
  bind_all(graph, inv, {"emb"});
  bind_all(graph, inv, graph_keys);

  auto* tr = command(&app, "train", "train a saliency model from a manifest", cmd_train);
  bind_all(tr, inv, {"manifest", "lr", "epochs", "batch_size", "val_fraction", "patience"});
  bind_all(tr, inv, model_keys);
  bind_all(tr, inv, graph_keys);

  auto* inf = command(&app, "infer", "predict a saliency map for one embedding", cmd_infer);
  bind_all(inf, inv, {"checkpoint", "emb", "height", "width"});

  auto* se = command(&app, "sal-eval", "MAE, F-max, E-max and Fbw over predictions or checkpoints", cmd_sal_eval);
  bind_all(se, inv, {"pairs", "checkpoint", "manifest", "split"});

  auto* compose = app.add_subcommand("compose", "conditioning helpers for image generation");
  compose->require_subcommand(1);
  bind_all(command(compose, "blend", "fuse foreground and background with a saliency map", cmd_blend), inv,
           {"fg", "bg", "saliency"});
  bind_all(command(compose, "inpaint-mask", "binarize and dilate a saliency map", cmd_inpaint_mask), inv,
           {"saliency", "theta", "dilate"});
  bind_all(command(compose, "rank", "score and order candidate images", cmd_rank), inv,
           {"candidates", "saliency", "text_vec", "lambda_clip", "lambda_mask", "theta", "consistency"});

  auto* cues = app.add_subcommand("text-cues", "textual cues from pooled embeddings");
  cues->require_subcommand(1);
  bind_all(command(cues, "fit", "fit the ridge projection on train entries with captions", cmd_cues_fit), inv,
           {"manifest", "lambda"});
  bind_all(command(cues, "extract", "top-k vocabulary terms and a prompt for one embedding", cmd_cues_extract), inv,
           {"emb", "projection", "vocab_terms", "vocab_vectors", "k"});

  auto* re = command(&app, "recon-eval", "PixCorr, SSIM and feature-file identification metrics", cmd_recon_eval);
  bind_all(re, inv, {"pairs", "feature", "distance"});

  auto* gc = command(&app, "gradcheck", "compare analytic and numeric gradients on small random graphs",
                     cmd_gradcheck);
  bind_all(gc, inv, {"variant", "seeds"});

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    return handler(resolve(inv));
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

// texsig command-line pipeline: phantom cohorts, patch extraction, deep
// clustering training, signatures, and grade linking.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "texsig/config.hpp"
#include "texsig/dcn.hpp"
#include "texsig/gradsuite.hpp"
#include "texsig/linker.hpp"
#include "texsig/reports.hpp"
#include "texsig/signature.hpp"
#include "texsig/synth.hpp"
#include "texsig/volume_io.hpp"

namespace fs = std::filesystem;
using namespace texsig;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool out_required = true) {
  cmd->add_option("--config", args.config_path, "JSON config file (flat keys)");
  auto* out = cmd->add_option("--out", args.out_dir, "output directory");
  if (out_required) out->required();
  cmd->add_option("--seed", args.seed, "master seed (overrides config)");
}

config::PipelineConfig effective_config(const CLI::App* cmd, const CommonArgs& args) {
  config::PipelineConfig cfg;
  if (cmd->count("--config")) cfg = config::load_config(args.config_path);
  if (cmd->count("--seed")) cfg.seed = args.seed;
  return cfg;
}

fs::path prepare_out(const std::string& dir, const config::PipelineConfig& cfg) {
  const fs::path out(dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + out.string() + ": " + ec.message());
  config::write_config(out / "effective_config.json", cfg);
  return out;
}

int cmd_phantom(const CLI::App* cmd, const CommonArgs& args, int n_cases,
                std::vector<int>& dims) {
  config::PipelineConfig cfg = effective_config(cmd, args);
  cfg.validate();
  config::apply_threads(cfg);
  synth::PhantomSpec spec;
  spec.seed = cfg.seed;
  if (cmd->count("--n")) spec.set_total_cases(n_cases);
  if (cmd->count("--dims")) {
    if (dims.size() != 3) throw ConfigError("--dims needs three extents");
    spec.dims = {dims[0], dims[1], dims[2]};
  }
  const fs::path out = prepare_out(args.out_dir, cfg);
  const fs::path manifest = synth::generate_cohort(spec, out);
  std::cout << "wrote " << spec.n_cases() << " cases\n" << manifest.string() << "\n";
  return 0;
}

int cmd_extract(const CLI::App* cmd, const CommonArgs& args,
                const std::string& manifest_path, long long n_patches) {
  config::PipelineConfig cfg = effective_config(cmd, args);
  if (cmd->count("--n")) cfg.n_patches = n_patches;
  cfg.validate();
  config::apply_threads(cfg);
  const auto manifest = io::read_manifest(manifest_path);
  if (manifest.empty()) throw FormatError("manifest has no cases: " + manifest_path);
  const fs::path out = prepare_out(args.out_dir, cfg);

  const long long per_case = cfg.n_patches / static_cast<long long>(manifest.size());
  const long long remainder = cfg.n_patches % static_cast<long long>(manifest.size());

  io::PatchSet all;
  all.px = cfg.out_px;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& rec = manifest[i];
    io::Volume vol = io::read_volume(rec.volume_path);
    const io::RoiMask mask = io::read_mask(rec.mask_path);
    const io::NormStats stats = io::normalize(vol, mask);
    io::ExtractParams ep;
    ep.n_patches = per_case + (static_cast<long long>(i) < remainder ? 1 : 0);
    ep.window_mm = cfg.window_mm;
    ep.out_px = cfg.out_px;
    ep.seed = derive_seed(cfg.seed, Stream::patch_extract, i);
    const io::PatchSet ps = io::extract_patches(vol, mask, ep, rec.case_id);
    all.pixels.insert(all.pixels.end(), ps.pixels.begin(), ps.pixels.end());
    all.provenance.insert(all.provenance.end(), ps.provenance.begin(), ps.provenance.end());
    all.stats.push_back({rec.case_id, stats.mean, stats.std_dev});
    std::cout << rec.case_id << ": " << ps.count() << " patches (roi mean " << stats.mean
              << ", std " << stats.std_dev << ")\n";
  }
  const fs::path ps_path = out / "patches.pset";
  io::write_patchset(ps_path, all);
  std::cout << "wrote " << all.count() << " patches\n" << ps_path.string() << "\n";
  return 0;
}

int cmd_train(const CLI::App* cmd, const CommonArgs& args, const std::string& patches_path,
              double lambda, int k, int pretrain_epochs, int joint_epochs,
              const std::string& mode) {
  config::PipelineConfig cfg = effective_config(cmd, args);
  if (cmd->count("--lambda")) cfg.lambda = lambda;
  if (cmd->count("--k")) cfg.k = k;
  if (cmd->count("--pretrain-epochs")) cfg.pretrain_epochs = pretrain_epochs;
  if (cmd->count("--joint-epochs")) cfg.joint_epochs = joint_epochs;
  if (cmd->count("--mode")) cfg.centroid_update_mode = mode;
  cfg.validate();
  config::apply_threads(cfg);
  const fs::path out = prepare_out(args.out_dir, cfg);

  const io::PatchSet patches = io::read_patchset(patches_path);
  if (patches.count() == 0) throw DegenerateDataError("patch set is empty");
  const net::ArchSpec arch = net::ArchSpec::full();
  if (patches.px != arch.in_px)
    throw ShapeError("patch size " + std::to_string(patches.px) +
                     " does not match the network input " + std::to_string(arch.in_px));

  const dcn::TrainConfig tc = cfg.train_config();
  dcn::DcnModel model;
  model.params = net::init_params<float>(arch, cfg.seed);

  std::cout << "pretraining " << tc.pretrain_epochs << " epochs on " << patches.count()
            << " patches\n";
  dcn::TrainLog log = dcn::pretrain(model.params, patches, tc);

  std::cout << "initializing " << cfg.k << " centroids\n";
  dcn::CentroidInit init = dcn::init_centroids(model.params, patches, cfg.k, cfg.seed);
  model.k = cfg.k;
  model.centroids = std::move(init.centroids);
  model.counts = std::move(init.cluster_sizes);

  std::cout << "joint training " << tc.joint_epochs << " epochs (lambda " << tc.lambda
            << ", " << cfg.centroid_update_mode << " centroids)\n";
  dcn::TrainLog joint_log = dcn::joint_train(model, patches, tc, init.assignment);
  for (auto& e : joint_log) e.epoch += tc.pretrain_epochs;
  log.insert(log.end(), joint_log.begin(), joint_log.end());

  const fs::path ckpt = out / "model.ckpt";
  dcn::save_checkpoint(ckpt, model);
  dcn::write_trainlog(out / "trainlog.csv", log);
  const dcn::LossTerms final_loss = dcn::evaluate_loss(model, patches, tc.lambda);
  std::cout << "final recon " << final_loss.recon << ", cluster " << final_loss.cluster
            << ", total " << final_loss.total << "\n"
            << ckpt.string() << "\n";
  return 0;
}

int cmd_signature(const CLI::App* cmd, const CommonArgs& args,
                  const std::string& checkpoint_path, const std::string& manifest_path) {
  config::PipelineConfig cfg = effective_config(cmd, args);
  cfg.validate();
  config::apply_threads(cfg);
  const fs::path out = prepare_out(args.out_dir, cfg);

  const dcn::DcnModel model = dcn::load_checkpoint(checkpoint_path);
  const auto manifest = io::read_manifest(manifest_path);
  sig::SigParams sp;
  sp.window_mm = cfg.window_mm;
  sp.out_px = cfg.out_px;
  sp.stride_px = cfg.stride_px;
  const sig::ManifestSignatures ms = sig::signatures_for_manifest(model, manifest, sp);

  sig::write_signature_table(out / "signatures.csv", ms.signatures);
  sig::write_label_maps(out / "labelmap.csv", ms.label_maps);
  std::cout << "wrote " << ms.signatures.size() << " signatures\n"
            << (out / "signatures.csv").string() << "\n";
  return 0;
}

int cmd_link(const CLI::App* cmd, const CommonArgs& args, const std::string& signatures_path,
             const std::string& task) {
  config::PipelineConfig cfg = effective_config(cmd, args);
  cfg.validate();
  config::apply_threads(cfg);
  if (task != "both" && task != "binary_forest" && task != "grade_lasso")
    throw ConfigError("--task must be both, binary_forest, or grade_lasso");
  const fs::path out = prepare_out(args.out_dir, cfg);

  const auto table = sig::read_signature_table(signatures_path);
  std::vector<linker::LabeledSignature> data;
  for (const auto& s : table) {
    if (s.grade < 0 || s.grade > 3)
      throw FormatError("signature for case '" + s.case_id + "' has grade " +
                        std::to_string(s.grade) + " outside 0..3");
    data.push_back({s.case_id, s.proportions, s.grade});
  }

  linker::LinkerConfig lc;
  lc.forest.n_trees = cfg.n_trees;
  lc.forest.mtry = cfg.mtry;
  lc.seed = cfg.seed;

  linker::MetricsReport binary, lasso;
  const bool run_binary = task != "grade_lasso";
  const bool run_lasso = task != "binary_forest";
  if (run_binary) {
    binary = linker::loo_cv(data, linker::Task::binary_forest, lc);
    std::cout << "binary forest: accuracy " << binary.metrics.accuracy << ", sensitivity "
              << binary.metrics.sensitivity << ", specificity " << binary.metrics.specificity
              << ", f1 " << binary.metrics.f1 << "\n";
    if (!binary.importance.mean.empty()) {
      reports::write_importance_csv(out / "importance.csv", binary.importance);
      reports::write_importance_svg(out / "importance.svg", binary.importance);
    }
  }
  if (run_lasso) {
    lasso = linker::loo_cv(data, linker::Task::grade_lasso, lc);
    std::cout << "grade lasso: spearman " << lasso.spearman_grade << " over "
              << (lasso.folds.size() - lasso.failed_folds.size()) << " predictions\n";
    reports::write_regression_csv(out / "regression.csv", lasso.folds);
    reports::write_regression_svg(out / "regression.svg", lasso.folds);
  }
  reports::write_metrics_json(out / "metrics.json", run_binary ? &binary : nullptr,
                              run_lasso ? &lasso : nullptr);
  std::cout << (out / "metrics.json").string() << "\n";
  return 0;
}

int cmd_gradcheck(const CLI::App* cmd, const CommonArgs& args, int n_seeds) {
  config::PipelineConfig cfg = effective_config(cmd, args);
  (void)n_seeds;
  const int seeds = cmd->count("--seeds") ? n_seeds : 5;
  if (seeds < 1) throw ConfigError("--seeds must be >= 1");
  std::cout << "finite-difference suite, " << seeds << " seeds, eps " << gradsuite::kEps
            << "\n";
  const bool pass = gradsuite::run_all(cfg.seed, seeds, std::cout);
  std::cout << (pass ? "all checks passed\n" : "CHECKS FAILED\n");
  return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unsupervised texture-pattern discovery pipeline"};
  app.require_subcommand(1);

  CommonArgs phantom_args, extract_args, train_args, sig_args, link_args, grad_args;

  auto* phantom = app.add_subcommand("phantom", "generate a synthetic texture cohort");
  int phantom_n = 40;
  std::vector<int> phantom_dims;
  phantom->add_option("--n", phantom_n, "total case count (split across grades)");
  phantom->add_option("--dims", phantom_dims, "volume extents nx ny nz")->expected(3);
  add_common(phantom, phantom_args);

  auto* extract = app.add_subcommand("extract", "extract training patches for a manifest");
  std::string extract_manifest;
  long long extract_n = 0;
  extract->add_option("--manifest", extract_manifest, "cohort manifest CSV")->required();
  extract->add_option("--n", extract_n, "total patch count (equal share per case)");
  add_common(extract, extract_args);

  auto* train = app.add_subcommand("train", "train the deep clustering network");
  std::string train_patches, train_mode;
  double train_lambda = 0.0;
  int train_k = 0, train_pre = 0, train_joint = 0;
  train->add_option("--patches", train_patches, "patch set file")->required();
  train->add_option("--lambda", train_lambda, "cluster loss weight");
  train->add_option("--k", train_k, "cluster count");
  train->add_option("--pretrain-epochs", train_pre, "reconstruction-only epochs");
  train->add_option("--joint-epochs", train_joint, "joint training epochs");
  train->add_option("--mode", train_mode, "centroid update mode: online|batch");
  add_common(train, train_args);

  auto* signature = app.add_subcommand("signature", "compute per-case cluster signatures");
  std::string sig_ckpt, sig_manifest;
  signature->add_option("--checkpoint", sig_ckpt, "trained model checkpoint")->required();
  signature->add_option("--manifest", sig_manifest, "cohort manifest CSV")->required();
  add_common(signature, sig_args);

  auto* link = app.add_subcommand("link", "link signatures to grade");
  std::string link_signatures, link_task = "both";
  link->add_option("--signatures", link_signatures, "signature table CSV")->required();
  link->add_option("--task", link_task, "both|binary_forest|grade_lasso");
  add_common(link, link_args);

  auto* gradcheck = app.add_subcommand("gradcheck", "run the finite-difference gradient suite");
  int grad_seeds = 5;
  gradcheck->add_option("--seeds", grad_seeds, "number of seeds (default 5)");
  add_common(gradcheck, grad_args, /*out_required=*/false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (phantom->parsed()) return cmd_phantom(phantom, phantom_args, phantom_n, phantom_dims);
    if (extract->parsed()) return cmd_extract(extract, extract_args, extract_manifest, extract_n);
    if (train->parsed())
      return cmd_train(train, train_args, train_patches, train_lambda, train_k, train_pre,
                       train_joint, train_mode);
    if (signature->parsed()) return cmd_signature(signature, sig_args, sig_ckpt, sig_manifest);
    if (link->parsed()) return cmd_link(link, link_args, link_signatures, link_task);
    if (gradcheck->parsed()) return cmd_gradcheck(gradcheck, grad_args, grad_seeds);
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

// bsqtool: tokenize, compress and analyse images with binary spherical quantization.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "bsq/bsq.hpp"

namespace {

namespace fs = std::filesystem;
using bsq::format_double;

void print_kv(std::ostream& o, const std::string& key, const std::string& value) { o << key << '=' << value << '\n'; }
void print_kv(std::ostream& o, const std::string& key, double value) { print_kv(o, key, format_double(value)); }
void print_kv(std::ostream& o, const std::string& key, std::uint64_t value) { print_kv(o, key, std::to_string(value)); }

bsq::ModelKind parse_model(const std::string& s) {
  if (s == "uniform") return bsq::ModelKind::Uniform;
  if (s == "adaptive-bit") return bsq::ModelKind::AdaptiveBit;
  if (s == "context-k") return bsq::ModelKind::ContextK;
  bsq::fail(bsq::ErrorKind::UnknownKind, "unknown model '" + s + "' (expected uniform, adaptive-bit or context-k)");
}

// ---------------------------------------------------------------------------

struct TokenizeArgs {
  std::string checkpoint;
  std::vector<std::string> inputs;
  std::string synthetic;
  std::size_t frames = 1;
  std::size_t rows = 4;
  std::size_t cols = 4;
  std::uint64_t seed = 0;
  std::string output = "tokens.bsqt";
};

int run_tokenize(const TokenizeArgs& a) {
  const bsq::ToyModel model = bsq::load_checkpoint(a.checkpoint);
  std::vector<bsq::GrayImage> frames;
  if (!a.synthetic.empty()) {
    frames = bsq::synthetic_frames(a.synthetic, a.frames, a.rows, a.cols, a.seed);
  } else {
    if (a.inputs.empty()) bsq::fail(bsq::ErrorKind::BadDimensions, "give --input images or --synthetic");
    for (const auto& p : a.inputs) frames.push_back(bsq::read_pnm(p));
  }
  const bsq::TokenFile tokens = bsq::tokenize(model, frames);
  bsq::write_file_atomic(a.output, bsq::serialize_tokens(tokens));
  print_kv(std::cout, "tokens", tokens.count());
  print_kv(std::cout, "frames", std::uint64_t{tokens.T});
  print_kv(std::cout, "grid", std::to_string(tokens.H) + "x" + std::to_string(tokens.W));
  print_kv(std::cout, "bits_per_token", std::uint64_t{tokens.L});
  if (!a.synthetic.empty()) print_kv(std::cout, "seed", a.seed);
  print_kv(std::cout, "output", a.output);
  return 0;
}

struct DetokenizeArgs {
  std::string checkpoint;
  std::string input;
  std::string output_dir = ".";
  std::string prefix = "frame";
};

int run_detokenize(const DetokenizeArgs& a) {
  const bsq::ToyModel model = bsq::load_checkpoint(a.checkpoint);
  const bsq::TokenFile tokens = bsq::deserialize_tokens(bsq::read_file(a.input));
  const auto frames = bsq::detokenize(model, tokens);
  fs::create_directories(a.output_dir);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    char name[64];
    std::snprintf(name, sizeof name, "%s_%04zu.pgm", a.prefix.c_str(), t);
    const fs::path out = fs::path(a.output_dir) / name;
    bsq::write_pgm(out, frames[t]);
    print_kv(std::cout, "frame", out.string());
  }
  return 0;
}

struct CompressArgs {
  std::string input;
  std::string output = "tokens.bsqc";
  std::string model = "context-k";
  unsigned order = 1;
};

int run_compress(const CompressArgs& a) {
  const bsq::TokenFile tokens = bsq::deserialize_tokens(bsq::read_file(a.input));
  const bsq::CompressedFile c = bsq::compress(tokens, parse_model(a.model), a.order);
  bsq::write_file_atomic(a.output, bsq::serialize_compressed(c));
  std::cout << bsq::render_kv(bsq::compute_stats(tokens, &c));
  print_kv(std::cout, "model", bsq::to_string(c.model));
  print_kv(std::cout, "order", std::uint64_t{c.order});
  return 0;
}

struct DecompressArgs {
  std::string input;
  std::string output = "tokens.bsqt";
};

int run_decompress(const DecompressArgs& a) {
  const bsq::CompressedFile c = bsq::deserialize_compressed(bsq::read_file(a.input));
  const bsq::TokenFile tokens = bsq::decompress(c);
  bsq::write_file_atomic(a.output, bsq::serialize_tokens(tokens));
  print_kv(std::cout, "tokens", tokens.count());
  print_kv(std::cout, "output", a.output);
  return 0;
}

struct StatsArgs {
  std::string tokens;
  std::string compressed;
  std::string format = "kv";
};

int run_stats(const StatsArgs& a) {
  const bsq::TokenFile tokens = bsq::deserialize_tokens(bsq::read_file(a.tokens));
  bsq::StatsReport report;
  if (a.compressed.empty()) {
    report = bsq::compute_stats(tokens);
  } else {
    const bsq::CompressedFile c = bsq::deserialize_compressed(bsq::read_file(a.compressed));
    report = bsq::compute_stats(tokens, &c);
  }
  if (a.format == "kv" || a.format == "both") std::cout << bsq::render_kv(report);
  if (a.format == "both") std::cout << '\n';
  if (a.format == "table" || a.format == "both") std::cout << bsq::render_table(report);
  return 0;
}

struct VerifyArgs {
  std::string tokens;
  std::string compressed;
};

int run_verify(const VerifyArgs& a) {
  const bsq::TokenFile expected = bsq::deserialize_tokens(bsq::read_file(a.tokens));
  const bsq::TokenFile decoded = bsq::decompress(bsq::deserialize_compressed(bsq::read_file(a.compressed)));
  const bool same = decoded == expected;
  print_kv(std::cout, "tokens", expected.count());
  print_kv(std::cout, "lossless", same ? "yes" : "no");
  if (!same) {
    std::cerr << "error: decoded tokens differ from " << a.tokens << '\n';
    return 1;
  }
  return 0;
}

struct TrainArgs {
  bsq::TrainConfig cfg;
  std::string quantizer = "bsq";
  std::string dataset = "low-rank";
  std::vector<std::string> images;
  std::size_t samples = 1024;
  std::uint64_t data_seed = 0;
  std::string checkpoint;
  std::string curve;
};

int run_train(TrainArgs a) {
  a.cfg.quantizer = bsq::parse_quantizer(a.quantizer);
  bsq::Dataset ds;
  if (a.images.empty()) {
    ds = bsq::make_synthetic_dataset(a.dataset, a.samples, a.data_seed);
  } else {
    std::vector<bsq::GrayImage> imgs;
    for (const auto& p : a.images) imgs.push_back(bsq::read_pnm(p));
    ds = bsq::dataset_from_images(imgs);
    a.dataset = "images";
  }
  const bsq::TrainResult r = bsq::train(a.cfg, ds);
  if (!a.checkpoint.empty()) bsq::save_checkpoint(a.checkpoint, r.model);
  if (!a.curve.empty()) {
    std::ostringstream o;
    o << "step,total,mse,entropy,per_sample_entropy,dataset_entropy,commit\n";
    for (std::size_t i = 0; i < r.report.loss_curve.size(); ++i) {
      const auto& l = r.report.loss_curve[i];
      o << i << ',' << format_double(l.total) << ',' << format_double(l.mse) << ',' << format_double(l.entropy) << ','
        << format_double(l.per_sample_entropy) << ',' << format_double(l.dataset_entropy) << ',' << format_double(l.commit) << '\n';
    }
    bsq::write_text_atomic(a.curve, o.str());
  }
  print_kv(std::cout, "seed", a.cfg.seed);
  print_kv(std::cout, "data_seed", a.data_seed);
  print_kv(std::cout, "dataset", a.dataset);
  print_kv(std::cout, "patches", std::uint64_t{ds.size()});
  print_kv(std::cout, "quantizer", std::string(bsq::to_string(a.cfg.quantizer)));
  print_kv(std::cout, "steps", std::uint64_t{a.cfg.steps});
  print_kv(std::cout, "initial_mse", r.report.initial_mse);
  print_kv(std::cout, "final_mse", r.report.final_mse);
  print_kv(std::cout, "final_loss", r.report.loss_curve.back().total);
  print_kv(std::cout, "code_usage", r.report.code_usage);
  if (!a.checkpoint.empty()) print_kv(std::cout, "checkpoint", a.checkpoint);
  return 0;
}

struct BoundsArgs {
  unsigned L = 4;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  unsigned shards = 1;
};

int run_bounds(const BoundsArgs& a) {
  print_kv(std::cout, "L", std::uint64_t{a.L});
  print_kv(std::cout, "bound_loose", bsq::bound_loose(a.L));
  if (a.L >= 2) print_kv(std::cout, "bound_tight", bsq::bound_tight(a.L));
  if (a.samples > 0) {
    const bsq::McReport mc = bsq::mc_quant_error(a.L, a.samples, a.seed, a.shards);
    print_kv(std::cout, "seed", mc.seed);
    print_kv(std::cout, "samples", std::uint64_t{mc.n_samples});
    print_kv(std::cout, "mc_mean", mc.mean);
    print_kv(std::cout, "mc_stderr", mc.std_error);
  }
  return 0;
}

struct AuditArgs {
  unsigned L = 8;
  double tau = 1.0;
  std::size_t batch = 64;
  std::size_t batches = 16;
  std::uint64_t seed = 0;
  bool adversarial = false;
};

int run_entropy_audit(const AuditArgs& a) {
  if (a.L < 1 || a.L > bsq::kMaxMixtureBits) bsq::fail(bsq::ErrorKind::TooLarge, "entropy-audit needs 1 <= L <= 12");
  if (a.batch < 1 || a.batches < 1) bsq::fail(bsq::ErrorKind::EmptyBatch, "batch and batches must be >= 1");
  bsq::Rng rng(a.seed);
  double gap_sum = 0.0;
  double gap_max = 0.0;
  double per_sample_sum = 0.0;
  double dataset_sum = 0.0;
  const std::size_t rounds = a.adversarial ? 1 : a.batches;
  for (std::size_t b = 0; b < rounds; ++b) {
    std::vector<bsq::SphereVec> us;
    if (a.adversarial) {
      // Two antipodal points: each is near-deterministic, yet their mean marginals are uniform.
      bsq::Vec v(a.L, 1.0);
      us.push_back(bsq::project_to_sphere(v));
      for (double& x : v) x = -x;
      us.push_back(bsq::project_to_sphere(v));
    } else {
      for (std::size_t i = 0; i < a.batch; ++i) {
        bsq::Vec v(a.L);
        for (double& x : v) x = rng.normal();
        us.push_back(bsq::project_to_sphere(v));
      }
    }
    std::vector<bsq::SoftAssignment> soft;
    for (const auto& u : us) soft.push_back(bsq::soft_assign(u, a.tau));
    const double gap = bsq::approximation_gap(us, a.tau);
    gap_sum += gap;
    gap_max = b == 0 ? gap : std::max(gap_max, gap);
    per_sample_sum += bsq::mean_per_sample_entropy(soft);
    dataset_sum += bsq::dataset_entropy_approx(soft);
  }
  const auto n = static_cast<double>(rounds);
  print_kv(std::cout, "L", std::uint64_t{a.L});
  print_kv(std::cout, "tau", a.tau);
  print_kv(std::cout, "seed", a.seed);
  print_kv(std::cout, "batches", std::uint64_t{rounds});
  print_kv(std::cout, "batch_size", std::uint64_t{a.adversarial ? 2 : a.batch});
  print_kv(std::cout, "mean_per_sample_entropy", per_sample_sum / n);
  print_kv(std::cout, "mean_dataset_entropy_approx", dataset_sum / n);
  print_kv(std::cout, "gap", gap_sum / n);
  print_kv(std::cout, "gap_max", gap_max);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Binary spherical quantization toolkit: tokenize, compress and analyse"};
  app.require_subcommand(1);

  TokenizeArgs tok;
  auto* c_tok = app.add_subcommand("tokenize", "Encode images (or a synthetic grid) into a token file");
  c_tok->add_option("--checkpoint", tok.checkpoint, "Model checkpoint written by 'train'")->required();
  c_tok->add_option("--input", tok.inputs, "Binary PGM/PPM frames, in order");
  c_tok->add_option("--synthetic", tok.synthetic, "Synthetic source instead of images: low-rank, gabor or checker");
  c_tok->add_option("--frames", tok.frames, "Synthetic frame count T")->capture_default_str();
  c_tok->add_option("--rows", tok.rows, "Synthetic tokens per column H")->capture_default_str();
  c_tok->add_option("--cols", tok.cols, "Synthetic tokens per row W")->capture_default_str();
  c_tok->add_option("--seed", tok.seed, "Seed for synthetic input")->capture_default_str();
  c_tok->add_option("-o,--output", tok.output, "Token file to write")->capture_default_str();

  DetokenizeArgs detok;
  auto* c_detok = app.add_subcommand("detokenize", "Decode a token file into PGM frames");
  c_detok->add_option("--checkpoint", detok.checkpoint, "Model checkpoint written by 'train'")->required();
  c_detok->add_option("-i,--input", detok.input, "Token file")->required();
  c_detok->add_option("--output-dir", detok.output_dir, "Directory for the frames")->capture_default_str();
  c_detok->add_option("--prefix", detok.prefix, "Frame file name prefix")->capture_default_str();

  CompressArgs comp;
  auto* c_comp = app.add_subcommand("compress", "Arithmetic-code a token file");
  c_comp->add_option("-i,--input", comp.input, "Token file")->required();
  c_comp->add_option("-o,--output", comp.output, "Compressed file to write")->capture_default_str();
  c_comp->add_option("--model", comp.model, "Probability model: uniform, adaptive-bit or context-k")->capture_default_str();
  c_comp->add_option("--order", comp.order, "Context order for context-k (0..4)")->capture_default_str();

  DecompressArgs decomp;
  auto* c_decomp = app.add_subcommand("decompress", "Recover the token file from a compressed file");
  c_decomp->add_option("-i,--input", decomp.input, "Compressed file")->required();
  c_decomp->add_option("-o,--output", decomp.output, "Token file to write")->capture_default_str();

  StatsArgs stats;
  auto* c_stats = app.add_subcommand("stats", "Report raw and coded sizes");
  c_stats->add_option("--tokens", stats.tokens, "Token file")->required();
  c_stats->add_option("--compressed", stats.compressed, "Compressed file for the same tokens");
  c_stats->add_option("--format", stats.format, "kv, table or both")->capture_default_str()->check(CLI::IsMember({"kv", "table", "both"}));

  VerifyArgs verify;
  auto* c_verify = app.add_subcommand("verify", "Check that a compressed file decodes to a token file");
  c_verify->add_option("--tokens", verify.tokens, "Reference token file")->required();
  c_verify->add_option("--compressed", verify.compressed, "Compressed file")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train the toy patch autoencoder");
  c_train->add_option("--seed", tr.cfg.seed, "Seed for initialization and batch sampling")->capture_default_str();
  c_train->add_option("--data-seed", tr.data_seed, "Seed for the synthetic dataset")->capture_default_str();
  c_train->add_option("--dataset", tr.dataset, "low-rank, gabor or checker")->capture_default_str();
  c_train->add_option("--images", tr.images, "Train on the 8x8 tiles of these PGM/PPM images instead of synthetic data");
  c_train->add_option("--samples", tr.samples, "Dataset size")->capture_default_str();
  c_train->add_option("--quantizer", tr.quantizer, "bsq, lfq, vq or none")->capture_default_str();
  c_train->add_option("--d", tr.cfg.d, "Latent width")->capture_default_str();
  c_train->add_option("--L", tr.cfg.L, "Bottleneck width")->capture_default_str();
  c_train->add_option("--K", tr.cfg.K, "VQ codebook size")->capture_default_str();
  c_train->add_option("--tau", tr.cfg.tau, "Soft-assignment temperature")->capture_default_str();
  c_train->add_option("--gamma", tr.cfg.gamma, "Weight of the dataset-entropy term (0 removes it)")->capture_default_str();
  c_train->add_option("--weight-entropy", tr.cfg.weight_entropy, "Entropy loss weight")->capture_default_str();
  c_train->add_option("--weight-commit", tr.cfg.weight_commit, "Commitment loss weight")->capture_default_str();
  c_train->add_option("--lr", tr.cfg.learning_rate, "SGD learning rate")->capture_default_str();
  c_train->add_option("--batch", tr.cfg.batch_size, "Batch size")->capture_default_str();
  c_train->add_option("--steps", tr.cfg.steps, "SGD steps")->capture_default_str();
  c_train->add_option("--checkpoint", tr.checkpoint, "Where to save the trained model");
  c_train->add_option("--curve", tr.curve, "CSV file for the per-step loss curve");

  BoundsArgs bounds;
  auto* c_bounds = app.add_subcommand("bounds", "Quantization error bounds, optionally with a Monte Carlo estimate");
  c_bounds->add_option("--L", bounds.L, "Bits per token")->capture_default_str();
  c_bounds->add_option("--samples", bounds.samples, "Monte Carlo samples (0 skips the estimate, else >= 1000)")->capture_default_str();
  c_bounds->add_option("--seed", bounds.seed, "Monte Carlo seed")->capture_default_str();
  c_bounds->add_option("--shards", bounds.shards, "Monte Carlo threads")->capture_default_str();

  AuditArgs audit;
  auto* c_audit = app.add_subcommand("entropy-audit", "Compare the factorized dataset entropy with the exact mixture entropy");
  c_audit->add_option("--L", audit.L, "Bits per token (1..12)")->capture_default_str();
  c_audit->add_option("--tau", audit.tau, "Soft-assignment temperature")->capture_default_str();
  c_audit->add_option("--batch", audit.batch, "Vectors per batch")->capture_default_str();
  c_audit->add_option("--batches", audit.batches, "Number of random batches")->capture_default_str();
  c_audit->add_option("--seed", audit.seed, "Seed for the random batches")->capture_default_str();
  c_audit->add_flag("--adversarial", audit.adversarial, "Use the antipodal two-point batch instead of random batches");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_tok->parsed()) return run_tokenize(tok);
    if (c_detok->parsed()) return run_detokenize(detok);
    if (c_comp->parsed()) return run_compress(comp);
    if (c_decomp->parsed()) return run_decompress(decomp);
    if (c_stats->parsed()) return run_stats(stats);
    if (c_verify->parsed()) return run_verify(verify);
    if (c_train->parsed()) return run_train(tr);
    if (c_bounds->parsed()) return run_bounds(bounds);
    if (c_audit->parsed()) return run_entropy_audit(audit);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

// Trains the toy autoencoder briefly, tokenizes a synthetic frame grid and
// compresses the tokens with each probability model.

#include <cstdio>

#include "bsq/bsq.hpp"

int main() {
  bsq::TrainConfig cfg;
  cfg.steps = 300;
  cfg.seed = 7;
  const bsq::Dataset ds = bsq::make_synthetic_dataset("low-rank", 512, 7);
  const bsq::TrainResult trained = bsq::train(cfg, ds);
  std::printf("training: mse %.5f -> %.5f, code usage %.3f\n", trained.report.initial_mse, trained.report.final_mse, trained.report.code_usage);

  const auto frames = bsq::synthetic_frames("low-rank", 4, 8, 8, 11);
  const bsq::TokenFile tokens = bsq::tokenize(trained.model, frames);
  std::printf("tokens: %llu at %u bits\n", static_cast<unsigned long long>(tokens.count()), static_cast<unsigned>(tokens.L));

  for (const auto kind : {bsq::ModelKind::Uniform, bsq::ModelKind::AdaptiveBit, bsq::ModelKind::ContextK}) {
    const bsq::CompressedFile c = bsq::compress(tokens, kind, 1);
    const bsq::StatsReport s = bsq::compute_stats(tokens, &c);
    const bool lossless = bsq::decompress(c) == tokens;
    std::printf("%-13s coded %6llu bits, %.4f bpp, savings %6.2f%%, lossless %s\n", bsq::to_string(kind).c_str(),
                static_cast<unsigned long long>(*s.coded_bits), *s.coded_bpp, 100.0 * *s.savings, lossless ? "yes" : "no");
  }

  const bsq::BlockMask mask = bsq::blockwise_causal_mask(3, 2);
  std::printf("mask for T=3, 2 tokens per frame:\n");
  for (std::size_t i = 0; i < mask.size(); ++i) {
    for (std::size_t j = 0; j < mask.size(); ++j) std::putchar(mask.at(i, j) ? '#' : '.');
    std::putchar('\n');
  }
  return 0;
}

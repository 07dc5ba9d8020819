#include <gtest/gtest.h>

#include <cmath>

#include "tsg/train.hpp"

using namespace tsg;

// Optimization health on the overfit preset: the training loss, averaged over
// the trailing 50 steps, never rises from one 50-step window to the next once
// past step 100.
TEST(Overfit, SmoothedLossNonincreasingAfterStep100) {
  RunConfig cfg = RunConfig::preset_named("overfit");
  cfg.eval_every = 10;  // rows carry the mean loss of each 10 steps
  const TrainData data = load_or_generate(cfg);
  SegModel model(cfg.model_config());
  const TrainResult r = train_model(model, cfg, data);
  ASSERT_EQ(r.rows.size(), cfg.steps / 10);

  auto smoothed = [&](std::size_t end_step) {
    double s = 0;
    for (std::size_t k = 0; k < 5; ++k) s += r.rows[end_step / 10 - 1 - k].loss;
    return s / 5;
  };
  for (std::size_t t = 150; t <= cfg.steps; t += 10) {
    EXPECT_LE(smoothed(t), smoothed(t - 50)) << "window ending at step " << t;
  }
  EXPECT_GE(r.train_patch_accuracy, 0.99);
}

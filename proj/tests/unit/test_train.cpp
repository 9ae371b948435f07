#include <doctest.h>

#include <sstream>
#include <stdexcept>

#include "meshes.hpp"
#include "nmc/pipeline.hpp"
#include "nmc/train.hpp"

using namespace nmc;

namespace {

const PreparedMesh& prepared() {
  static const PreparedMesh p = prepare_mesh(testing::noisy_icosphere(3, 0.05, 1, 3, 6, 4), 120, 1);
  return p;
}

TrainConfig small_config(int epochs) {
  TrainConfig c;
  c.arch.frequencies = 4;
  c.arch.hidden_layers = 3;
  c.arch.width = 16;
  c.arch.ring_layers = 2;
  c.epochs = epochs;
  c.batch_size = 128;
  c.lr0 = 3e-3;
  c.seed = 17;
  return c;
}

}  // namespace

TEST_CASE("training lowers the loss and is deterministic") {
  const TrainingSet& set = prepared().training;
  const TrainResult a = train(set, small_config(40));
  const TrainResult b = train(set, small_config(40));
  CHECK(a.params == b.params);
  CHECK(a.final_loss == b.final_loss);
  CHECK(a.final_loss < 0.5 * a.initial_loss);
  REQUIRE(a.history.size() == 40);
  CHECK(a.history.back().loss < a.history.front().loss);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].epoch == static_cast<int>(i) + 1);
    CHECK(a.history[i].keep_fraction == 1.0);
  }
  // The last step of the cosine schedule runs at a small but non-zero rate.
  CHECK(a.history.back().lr < 0.01 * small_config(40).lr0);

  // The returned network predicts raw displacements.
  const VertexBatch all = encode_training_set(set, small_config(40).arch.frequencies);
  CHECK(dataset_loss(a.params, all) == doctest::Approx(a.final_loss));

  TrainConfig other = small_config(40);
  other.seed = 18;
  CHECK_FALSE(train(set, other).params == a.params);
}

TEST_CASE("pruning during training reaches the target") {
  const TrainingSet& set = prepared().training;
  const PruneSchedule schedule = prune_schedule(0.5, 5, {2, 4, 6, 8, 10});
  const TrainResult r = train(set, small_config(20), schedule);
  const std::size_t total = r.mask.prunable();
  CHECK(std::abs(static_cast<double>(r.mask.unmasked_count()) - 0.5 * static_cast<double>(total)) <= 1.0);
  for (std::size_t i = 0; i < r.params.size(); ++i) {
    if (r.mask.masked(i)) CHECK(r.params.values()[i] == 0.0);
  }
  CHECK(r.history[0].keep_fraction == 1.0);
  CHECK(r.history[1].keep_fraction < 1.0);
  CHECK(r.history[9].keep_fraction == doctest::Approx(r.mask.keep_fraction()));
  for (std::size_t i = 1; i < r.history.size(); ++i) {
    CHECK(r.history[i].keep_fraction <= r.history[i - 1].keep_fraction);
  }
  CHECK(std::isfinite(r.final_loss));
}

TEST_CASE("training argument checks") {
  const TrainingSet& set = prepared().training;
  CHECK_THROWS_AS(train(set, small_config(5), prune_schedule(0.5, 2, {3, 6})), std::invalid_argument);
  TrainConfig zero_batch = small_config(1);
  zero_batch.batch_size = 0;
  CHECK_THROWS_AS(train(set, zero_batch), std::invalid_argument);
  CHECK_THROWS_AS(train(TrainingSet{}, small_config(1)), std::invalid_argument);
  CHECK_THROWS_AS(train_from(set, small_config(1), InrParams(Architecture{}), SparsityMask{}), std::invalid_argument);
}

TEST_CASE("epoch callback can stop early") {
  int seen = 0;
  const TrainResult r = train(prepared().training, small_config(30), {}, [&](const EpochStats& s) {
    ++seen;
    return s.epoch < 3;
  });
  CHECK(seen == 3);
  CHECK(r.history.size() == 3);
}

TEST_CASE("loss csv") {
  std::ostringstream out;
  write_loss_csv(out, {{1, 0.001, 0.5, 1.0}, {2, 0.0005, 0.25, 0.9}});
  CHECK(out.str() == "epoch,lr,loss,keep_fraction\n1,0.001,0.5,1\n2,0.0005,0.25,0.9\n");
}

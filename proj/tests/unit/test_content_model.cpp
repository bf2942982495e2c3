// Copyright 2026 The Mnemo Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "mnemo/content_model.hpp"
#include "mnemo/eval.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace mnemo {
namespace {

std::shared_ptr<EmbeddingStore> line_store() {
  auto s = std::make_shared<EmbeddingStore>(2);
  s->add("q", std::vector<float>{1, 0});
  s->add("near", std::vector<float>{0.9f, 0.1f});
  s->add("mid", std::vector<float>{0.5f, 0.5f});
  s->add("far", std::vector<float>{-1, 0});
  return s;
}

UserState studied(std::initializer_list<const char*> cards) {
  UserState u("u");
  Timestamp t = 0;
  for (const char* c : cards) u.apply({"u", c, t += 60, t % 120 == 0, 0, ""});
  return u;
}

TEST(ContentModel, TopKRetrievalExcludesQueryCard) {
  const auto store = line_store();
  const UserState u = studied({"far", "q", "mid", "near"});
  CardAggregates agg;
  ModelLayout layout;
  layout.k = 2;
  const EncodedExample ex = encode(*store, layout, u, agg, "q", 1000);
  ASSERT_EQ(ex.retrieved.size(), 2u);
  EXPECT_EQ(store->card_id(ex.retrieved[0].store_index), "near");
  EXPECT_EQ(store->card_id(ex.retrieved[1].store_index), "mid");
  EXPECT_TRUE(ex.seen);
  EXPECT_EQ(ex.retrieved[0].features, extract(u, "near", 1000, agg));
}

TEST(ContentModel, PastKNewestFirst) {
  const auto store = line_store();
  const UserState u = studied({"near", "far", "q", "mid", "far"});
  CardAggregates agg;
  ModelLayout layout{RetrievalMode::kPastK, 2, true, FeatureMask::all()};
  const EncodedExample ex = encode(*store, layout, u, agg, "q", 1000);
  ASSERT_EQ(ex.retrieved.size(), 2u);
  EXPECT_EQ(store->card_id(ex.retrieved[0].store_index), "far");
  EXPECT_EQ(store->card_id(ex.retrieved[1].store_index), "mid");
}

TEST(ContentModel, NoRetrievalAndNoEmbeddingsLayouts) {
  ModelLayout none{RetrievalMode::kNone, 5, true, FeatureMask::all()};
  EXPECT_EQ(none.effective_k(), 0u);
  EXPECT_EQ(none.input_layout(768).width(), 768u + 24);
  ModelLayout plain{RetrievalMode::kTopK, 5, false, FeatureMask::offline_subset()};
  EXPECT_EQ(plain.input_layout(768).width(), 9u + 5 * 10);
  EXPECT_EQ(parse_retrieval_mode(to_string(RetrievalMode::kPastK)), RetrievalMode::kPastK);
  EXPECT_MNEMO_ERROR(parse_retrieval_mode("bm25"), ErrorCode::kInvalidArgument);
}

TEST(ContentModel, BuildExamplesUsesPrecedingState) {
  const auto store = line_store();
  const std::vector<StudyRecord> log{{"u", "q", 0, true, 0, ""}, {"v", "q", 10, false, 0, ""},
                                     {"u", "q", 20, false, 0, ""}};
  const auto ex = build_examples(*store, ModelLayout{}, log);
  ASSERT_EQ(ex.size(), 3u);
  EXPECT_FALSE(ex[0].seen);
  EXPECT_FALSE(ex[1].seen);
  EXPECT_TRUE(ex[2].seen);
  EXPECT_EQ(ex[1].card.features[Feature::kCardNStudyTotal], 1.0);
  EXPECT_EQ(ex[2].card.features[Feature::kCardNStudyTotal], 2.0);
  EXPECT_TRUE(ex[0].label);
  EXPECT_FALSE(ex[2].label);
  const std::vector<StudyRecord> bad{{"u", "q", 10, true, 0, ""}, {"v", "q", 5, true, 0, ""}};
  EXPECT_MNEMO_ERROR(build_examples(*store, ModelLayout{}, bad), ErrorCode::kOutOfOrderTimestamp);
  const std::vector<StudyRecord> missing{{"u", "nope", 10, true, 0, ""}};
  EXPECT_MNEMO_ERROR(build_examples(*store, ModelLayout{}, missing), ErrorCode::kMissingEmbedding);
}

struct Trained {
  SyntheticCorpus corpus;
  TrainResult result;
  TrainConfig config;
};

Trained train_small(ModelLayout layout = {}) {
  SyntheticStudentSpec spec;
  spec.embedding_dim = 8;
  Trained t{generate_synthetic(spec, 4, 50, 600), {}, {}};
  t.config.learning_rate = 1e-3;
  t.config.epochs = 2;
  t.config.hidden_width = 16;
  const auto ex = build_examples(*t.corpus.embeddings, layout, t.corpus.records);
  t.result = train_content_model(t.corpus.embeddings, layout, std::span(ex).first(450), t.config);
  return t;
}

TEST(ContentModel, PredictEqualsManualPipeline) {
  const Trained t = train_small();
  const ContentModel& m = *t.result.model;
  EXPECT_EQ(t.result.loss_per_epoch.size(), 2u);
  EXPECT_EQ(t.result.example_count, 450u);
  UserState u;
  CardAggregates agg;
  for (std::size_t i = 0; i < 30; ++i) {
    const auto& r = t.corpus.records[i];
    if (r.user_id != t.corpus.records[0].user_id) continue;
    u.apply(r);
    agg.add(r.card_id, r.correct);
  }
  const Timestamp now = *u.last_timestamp() + 600;
  for (const std::string id : {"c03", "c10", "c44"}) {
    const EncodedExample ex = encode(m.store(), m.layout(), u, agg, id, now);
    std::vector<double> row(m.params().input_width());
    assemble_example(m.store(), m.layout(), m.normalization(), ex, row);
    EXPECT_NEAR(m.predict(u, agg, id, now), oracle::scalar_forward(m.params(), row), 1e-12);
  }
}

TEST(ContentModel, CheckpointRoundTripIsExact) {
  for (const ModelLayout& layout :
       {ModelLayout{}, ModelLayout{RetrievalMode::kPastK, 3, false, FeatureMask::offline_subset()}}) {
    const Trained t = train_small(layout);
    std::stringstream buf;
    save_checkpoint(*t.result.model, t.config, buf);
    const LoadedCheckpoint back = load_checkpoint(buf, t.corpus.embeddings);
    EXPECT_EQ(back.model->layout(), layout);
    EXPECT_EQ(back.model->params().flatten(), t.result.model->params().flatten());
    EXPECT_EQ(back.model->normalization().mean, t.result.model->normalization().mean);
    EXPECT_EQ(back.config.learning_rate, t.config.learning_rate);
    EXPECT_EQ(back.config.epochs, t.config.epochs);
    const EvalRun a = evaluate(*t.result.model, t.corpus.records, 450);
    const EvalRun b = evaluate(*back.model, t.corpus.records, 450);
    for (std::size_t i = 0; i < a.predictions.size(); ++i) EXPECT_EQ(a.predictions[i].score, b.predictions[i].score);
  }
}

TEST(ContentModel, CheckpointCorruptionDetected) {
  const Trained t = train_small();
  std::stringstream buf;
  save_checkpoint(*t.result.model, t.config, buf);
  const std::string bytes = buf.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
  EXPECT_MNEMO_ERROR(load_checkpoint(truncated, t.corpus.embeddings), ErrorCode::kCorruptCheckpoint);
  std::stringstream magic("XXXX" + bytes.substr(4));
  EXPECT_MNEMO_ERROR(load_checkpoint(magic, t.corpus.embeddings), ErrorCode::kCorruptCheckpoint);
  std::stringstream again(bytes);
  EXPECT_MNEMO_ERROR(load_checkpoint(again, std::make_shared<EmbeddingStore>(3)), ErrorCode::kDimensionMismatch);
  EXPECT_MNEMO_ERROR(load_checkpoint(std::filesystem::path("/nonexistent/x.krl"), t.corpus.embeddings),
                     ErrorCode::kIoError);
}

TEST(ContentModel, EmptyTrainingSplitRejected) {
  auto store = line_store();
  EXPECT_MNEMO_ERROR(train_content_model(store, ModelLayout{}, {}, TrainConfig{}), ErrorCode::kEmptySplit);
}

}  // namespace
}  // namespace mnemo

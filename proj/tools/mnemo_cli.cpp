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

// mnemo: train, evaluate, ablate, simulate, plot forgetting curves and serve.

#include <csignal>
#include <pthread.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mnemo/baselines.hpp"
#include "mnemo/content_model.hpp"
#include "mnemo/eval.hpp"
#include "mnemo/ingestion.hpp"
#include "mnemo/keyvalue.hpp"
#include "mnemo/service.hpp"

namespace fs = std::filesystem;
using namespace mnemo;

namespace {

struct DataOptions {
  std::string data;
  std::string embeddings;
  bool synthetic = false;
  std::uint64_t seed = 7;
  std::size_t users = 50;
  std::size_t cards = 2000;
  std::size_t records = 50000;
  int clusters = 5;
  double ratio = kDefaultTrainRatio;
};

struct LayoutOptions {
  std::string retrieval = "topk";
  std::size_t k = kDefaultRetrievalK;
  bool no_embeddings = false;
  std::string features = "all";

  ModelLayout layout() const {
    ModelLayout l;
    l.retrieval = parse_retrieval_mode(retrieval);
    l.k = l.retrieval == RetrievalMode::kNone ? 0 : k;
    l.use_embeddings = !no_embeddings;
    if (features == "all") {
      l.features = FeatureMask::all();
    } else if (features == "offline") {
      l.features = FeatureMask::offline_subset();
    } else {
      l.features = FeatureMask::parse(features);
    }
    return l;
  }
};

struct Data {
  std::vector<Flashcard> cards;
  std::vector<StudyRecord> records;  // chronological
  std::shared_ptr<const EmbeddingStore> store;
  std::vector<DatasetRow> rows;      // empty for synthetic data
};

void add_data_options(CLI::App* app, DataOptions& o) {
  app->add_option("--data", o.data, "study log (JSON Lines or CSV)");
  app->add_option("--embeddings", o.embeddings, "card embeddings (text or binary)");
  app->add_flag("--synthetic", o.synthetic, "use the synthetic-student generator instead of --data");
  app->add_option("--seed", o.seed, "synthetic generator seed");
  app->add_option("--users", o.users, "synthetic users");
  app->add_option("--cards", o.cards, "synthetic cards");
  app->add_option("--records", o.records, "synthetic records");
  app->add_option("--clusters", o.clusters, "synthetic card clusters");
  app->add_option("--ratio", o.ratio, "chronological train fraction");
}

void add_layout_options(CLI::App* app, LayoutOptions& o) {
  app->add_option("--retrieval", o.retrieval, "topk, pastk or none");
  app->add_option("--k", o.k, "retrieved cards per example");
  app->add_flag("--no-embeddings", o.no_embeddings, "drop card embeddings from the input");
  app->add_option("--features", o.features, "all, offline, or comma-separated feature names");
}

void add_train_options(CLI::App* app, TrainConfig& c) {
  app->add_option("--lr", c.learning_rate, "Adam learning rate");
  app->add_option("--epochs", c.epochs, "training epochs");
  app->add_option("--batch", c.batch_size, "minibatch size");
  app->add_option("--hidden", c.hidden_width, "hidden width");
  app->add_option("--dropout", c.dropout, "dropout rate");
  app->add_option("--train-seed", c.seed, "initialization and shuffling seed");
}

SyntheticCorpus synthesize(const DataOptions& o) {
  SyntheticStudentSpec spec;
  spec.clusters = o.clusters;
  spec.seed = o.seed;
  return generate_synthetic(spec, o.users, o.cards, o.records);
}

Data load_data(const DataOptions& o) {
  Data d;
  if (o.synthetic) {
    SyntheticCorpus c = synthesize(o);
    d.cards = std::move(c.cards);
    d.records = std::move(c.records);
    d.store = std::move(c.embeddings);
    return d;
  }
  if (o.data.empty()) throw Error(ErrorCode::kInvalidArgument, "--data or --synthetic is required");
  d.rows = load_dataset(o.data);
  d.records = chronological_records(d.rows);
  d.cards = corpus_from_rows(d.rows);
  if (!o.embeddings.empty()) d.store = std::make_shared<EmbeddingStore>(load_embeddings(o.embeddings));
  return d;
}

std::shared_ptr<const EmbeddingStore> require_store(const Data& d) {
  if (!d.store) throw Error(ErrorCode::kInvalidArgument, "--embeddings is required");
  return d.store;
}

// Values from the --config file fill options not given on the command line.
void apply_config(CLI::App* app, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  const KeyValues kv = read_key_values(in);
  for (CLI::Option* opt : app->get_options()) {
    if (opt->count() > 0 || opt->get_lnames().empty()) continue;
    const auto it = kv.find(opt->get_lnames().front());
    if (it == kv.end()) continue;
    opt->add_result(it->second);
    opt->run_callback();
  }
}

void print_report(const EvalReport& r, bool json) {
  if (json) {
    std::cout << report_json(r) << '\n';
  } else {
    write_report(r, std::cout);
  }
}

std::string fmt_opt(const std::optional<double>& v) {
  char buf[32];
  if (!v) return "-";
  std::snprintf(buf, sizeof(buf), "%.4f", *v);
  return buf;
}

std::vector<std::unique_ptr<StudentModel>> baselines(std::span<const StudyRecord> train) {
  std::vector<std::unique_ptr<StudentModel>> out;
  out.push_back(std::make_unique<LeitnerModel>());
  out.push_back(std::make_unique<Sm2Model>());
  const auto examples = hlr_examples(train);
  HlrWeights w;
  if (!examples.empty()) w = hlr_fit(examples, {}).weights;
  out.push_back(std::make_unique<HlrModel>(w));
  out.push_back(std::make_unique<FsrsModel>());
  return out;
}

std::unique_ptr<StudentModel> baseline_by_name(const std::string& name, std::span<const StudyRecord> train) {
  for (auto& m : baselines(train)) {
    if (m->tag() == name || (name == "fsrs" && m->tag() == "fsrs-simplified")) return std::move(m);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown model '" + name + "'");
}

TrainResult train(const Data& d, const ModelLayout& layout, const TrainConfig& config, std::size_t n_train,
                  bool verbose) {
  const auto store = require_store(d);
  const auto examples = build_examples(*store, layout, d.records);
  return train_content_model(store, layout, std::span(examples).first(n_train), config, [&](int epoch, double loss) {
    if (verbose) std::cerr << "epoch " << epoch << " loss " << loss << '\n';
  });
}

void write_dataset(const SyntheticCorpus& c, const fs::path& dir) {
  fs::create_directories(dir);
  std::map<std::string, const Flashcard*> by_id;
  for (const Flashcard& f : c.cards) by_id[f.card_id] = &f;
  std::vector<DatasetRow> rows;
  rows.reserve(c.records.size());
  for (std::size_t i = 0; i < c.records.size(); ++i) {
    const StudyRecord& r = c.records[i];
    DatasetRow row;
    row.line = i + 1;
    row.user_id = r.user_id;
    row.card_id = r.card_id;
    row.card_text = by_id.at(r.card_id)->front_text;
    row.deck_id = by_id.at(r.card_id)->deck_id;
    row.deck_name = by_id.at(r.card_id)->deck_name;
    row.response = r.correct;
    row.timestamp = r.timestamp;
    row.utc_datetime = format_utc_datetime(r.timestamp);
    row.utc_date = row.utc_datetime.substr(0, 10);
    row.elapsed_milliseconds = r.elapsed_ms;
    rows.push_back(std::move(row));
  }
  fill_stored_features(rows);
  std::ofstream log(dir / "records.jsonl");
  write_jsonl(rows, log);
  std::ofstream cards(dir / "cards.jsonl");
  write_cards_jsonl(c.cards, cards);
  std::ofstream emb(dir / "embeddings.bin", std::ios::binary);
  write_embeddings_binary(*c.embeddings, emb);
  std::ofstream manifest(dir / "split.manifest");
  write_manifest(chronological_split(rows), manifest);
}

std::unique_ptr<StudentModel> load_model(const std::string& checkpoint, const std::string& model_name, const Data& d,
                                         std::size_t n_train) {
  if (!checkpoint.empty()) return std::move(load_checkpoint(fs::path(checkpoint), require_store(d)).model);
  return baseline_by_name(model_name, std::span(d.records).first(n_train));
}

int run_serve(Engine& engine, const ServiceConfig& config) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  HttpServer server(engine, config);
  const int port = server.bind();
  std::cerr << "listening on " << config.host << ':' << port << '\n';
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.run();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mnemo: content-aware spaced repetition"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "key=value file; command-line flags take precedence");

  DataOptions data;
  LayoutOptions layout;
  TrainConfig train_cfg;
  train_cfg.learning_rate = 1e-3;
  train_cfg.epochs = 8;
  bool json = false, verbose = false;
  std::string checkpoint, model_name = "mnemo", out, manifest;

  CLI::App* train_cmd = app.add_subcommand("train", "train the content model and write a checkpoint");
  add_data_options(train_cmd, data);
  add_layout_options(train_cmd, layout);
  add_train_options(train_cmd, train_cfg);
  train_cmd->add_option("--out", out, "checkpoint path")->required();
  train_cmd->add_flag("--verbose", verbose, "print per-epoch loss");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint or baseline on the chronological split");
  add_data_options(eval_cmd, data);
  eval_cmd->add_option("--checkpoint", checkpoint, "content-model checkpoint");
  eval_cmd->add_option("--model", model_name, "baseline when no checkpoint: leitner, sm2, hlr, fsrs, or all");
  eval_cmd->add_option("--manifest", manifest, "split manifest to verify against the data");
  eval_cmd->add_flag("--json", json, "JSON output");

  CLI::App* ablate_cmd = app.add_subcommand("ablate", "sweep embeddings, feature sets and k");
  add_data_options(ablate_cmd, data);
  add_train_options(ablate_cmd, train_cfg);
  std::vector<std::size_t> ks{0, 1, 3, 5, 10};
  ablate_cmd->add_option("--ks", ks, "retrieval sizes to sweep")->delimiter(',');
  ablate_cmd->add_flag("--verbose", verbose, "print per-epoch loss");

  CLI::App* sim_cmd = app.add_subcommand("simulate", "generate synthetic logs and evaluate the models on them");
  add_data_options(sim_cmd, data);
  add_layout_options(sim_cmd, layout);
  add_train_options(sim_cmd, train_cfg);
  sim_cmd->add_option("--out", out, "directory for records.jsonl, cards.jsonl, embeddings.bin, split.manifest");
  bool with_content = false;
  sim_cmd->add_flag("--train", with_content, "also train and evaluate the content model");
  sim_cmd->add_flag("--json", json, "JSON output");

  CLI::App* curve_cmd = app.add_subcommand("curve", "21-point forgetting curve for a user and card");
  add_data_options(curve_cmd, data);
  std::string user, card;
  std::optional<Timestamp> at;
  curve_cmd->add_option("--checkpoint", checkpoint, "content-model checkpoint");
  curve_cmd->add_option("--model", model_name, "baseline when no checkpoint");
  curve_cmd->add_option("--user", user, "user id")->required();
  curve_cmd->add_option("--card", card, "card id")->required();
  curve_cmd->add_option("--at", at, "start time, UTC seconds (default: the user's last study)");

  CLI::App* serve_cmd = app.add_subcommand("serve", "run the HTTP API");
  ServiceConfig service;
  std::string cards_path, log_path;
  bool no_sync = false;
  serve_cmd->add_option("--cards", cards_path, "card corpus (JSON Lines)")->required();
  serve_cmd->add_option("--embeddings", data.embeddings, "card embeddings, required with --checkpoint");
  serve_cmd->add_option("--checkpoint", checkpoint, "content-model checkpoint");
  serve_cmd->add_option("--model", model_name, "baseline when no checkpoint: leitner, sm2, hlr or fsrs");
  serve_cmd->add_option("--data", data.data, "study log used to fit hlr");
  serve_cmd->add_option("--log", log_path, "event log for durability and replay");
  serve_cmd->add_option("--host", service.host, "bind address");
  serve_cmd->add_option("--port", service.port, "port, 0 for any");
  serve_cmd->add_flag("--test-clock", service.test_clock, "honour X-Clock-Override");
  serve_cmd->add_flag("--no-sync", no_sync, "skip fsync after each event");

  CLI11_PARSE(app, argc, argv);

  try {
    for (CLI::App* sub : app.get_subcommands()) apply_config(sub, config_path);

    if (*train_cmd) {
      const Data d = load_data(data);
      const std::size_t n_train = train_count(d.records.size(), data.ratio);
      TrainResult r = train(d, layout.layout(), train_cfg, n_train, verbose);
      save_checkpoint(*r.model, train_cfg, fs::path(out));
      std::cout << "trained on " << r.example_count << " examples, final loss " << r.loss_per_epoch.back()
                << ", wrote " << out << '\n';
    } else if (*eval_cmd) {
      const Data d = load_data(data);
      if (!manifest.empty()) {
        if (d.rows.empty()) throw Error(ErrorCode::kInvalidArgument, "--manifest needs --data");
        std::ifstream in(manifest);
        if (!in) throw Error(ErrorCode::kIoError, "cannot open " + manifest);
        const SplitManifest m = read_manifest(in);
        if (!(m == chronological_split(d.rows, m.ratio))) {
          throw Error(ErrorCode::kInvalidArgument, "manifest does not match the data");
        }
        data.ratio = m.ratio;
      }
      const std::size_t n_train = train_count(d.records.size(), data.ratio);
      std::vector<std::unique_ptr<StudentModel>> models;
      if (checkpoint.empty() && model_name == "all") {
        models = baselines(std::span(d.records).first(n_train));
      } else {
        models.push_back(load_model(checkpoint, model_name, d, n_train));
      }
      std::vector<const StudentModel*> ptrs;
      for (const auto& m : models) ptrs.push_back(m.get());
      for (const EvalRun& run : evaluate(ptrs, d.records, n_train)) print_report(run.report, json);
    } else if (*ablate_cmd) {
      const Data d = load_data(data);
      const std::size_t n_train = train_count(d.records.size(), data.ratio);
      std::vector<std::pair<std::string, ModelLayout>> variants;
      variants.emplace_back("full", ModelLayout{});
      variants.emplace_back("no-embeddings", ModelLayout{RetrievalMode::kTopK, kDefaultRetrievalK, false,
                                                         FeatureMask::all()});
      variants.emplace_back("offline-features",
                            ModelLayout{RetrievalMode::kTopK, kDefaultRetrievalK, true, FeatureMask::offline_subset()});
      variants.emplace_back("past-k", ModelLayout{RetrievalMode::kPastK, kDefaultRetrievalK, true, FeatureMask::all()});
      for (std::size_t k : ks) {
        ModelLayout l{k == 0 ? RetrievalMode::kNone : RetrievalMode::kTopK, k, true, FeatureMask::all()};
        variants.emplace_back("k=" + std::to_string(k), l);
      }
      std::printf("%-18s %10s %10s %10s %10s\n", "variant", "seen.auc", "seen.ece", "unseen.auc", "unseen.ece");
      for (const auto& [name, l] : variants) {
        TrainResult r = train(d, l, train_cfg, n_train, verbose);
        const EvalReport rep = evaluate(*r.model, d.records, n_train).report;
        std::printf("%-18s %10s %10s %10s %10s\n", name.c_str(), fmt_opt(rep.seen.auc).c_str(),
                    fmt_opt(rep.seen.ece).c_str(), fmt_opt(rep.unseen.auc).c_str(), fmt_opt(rep.unseen.ece).c_str());
        std::fflush(stdout);
      }
    } else if (*sim_cmd) {
      const SyntheticCorpus c = synthesize(data);
      if (!out.empty()) write_dataset(c, out);
      const std::size_t n_train = train_count(c.records.size(), data.ratio);
      auto models = baselines(std::span(c.records).first(n_train));
      if (with_content) {
        Data d{c.cards, c.records, c.embeddings, {}};
        models.push_back(train(d, layout.layout(), train_cfg, n_train, false).model);
      }
      std::vector<const StudentModel*> ptrs;
      for (const auto& m : models) ptrs.push_back(m.get());
      for (const EvalRun& run : evaluate(ptrs, c.records, n_train)) print_report(run.report, json);
    } else if (*curve_cmd) {
      const Data d = load_data(data);
      const std::size_t n_train = train_count(d.records.size(), data.ratio);
      const auto model = load_model(checkpoint, model_name, d, n_train);
      UserState state(user);
      CardAggregates agg;
      for (const StudyRecord& r : d.records) {
        if (r.user_id == user) state.apply(r);
        agg.add(r.card_id, r.correct);
      }
      if (state.record_count() == 0) throw Error(ErrorCode::kUnknownUser, "no records for user '" + user + "'");
      const Timestamp start = at.value_or(*state.last_timestamp());
      for (const CurvePoint& p : forgetting_curve(*model, state, agg, card, start).points) {
        std::printf("%d\t%.6f\n", p.day, p.probability);
      }
    } else if (*serve_cmd) {
      std::ifstream in(cards_path);
      if (!in) throw Error(ErrorCode::kIoError, "cannot open " + cards_path);
      std::vector<Flashcard> corpus = read_cards_jsonl(in);
      std::shared_ptr<const StudentModel> model;
      if (!checkpoint.empty()) {
        if (data.embeddings.empty()) throw Error(ErrorCode::kInvalidArgument, "--checkpoint needs --embeddings");
        auto store = std::make_shared<const EmbeddingStore>(load_embeddings(data.embeddings));
        model = std::move(load_checkpoint(fs::path(checkpoint), store).model);
      } else {
        if (model_name == "mnemo") throw Error(ErrorCode::kInvalidArgument, "the mnemo model needs --checkpoint");
        std::vector<StudyRecord> history;
        if (!data.data.empty()) history = chronological_records(load_dataset(data.data));
        if (model_name == "hlr" && history.empty()) {
          throw Error(ErrorCode::kInvalidArgument, "hlr needs --data to fit its weights");
        }
        model = baseline_by_name(model_name, history);
      }
      Engine::Options options;
      if (!log_path.empty()) options.log_path = log_path;
      options.sync_writes = !no_sync;
      Engine engine(std::move(corpus), std::move(model), options);
      return run_serve(engine, service);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

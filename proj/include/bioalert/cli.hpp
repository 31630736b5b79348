#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bioalert/bilstm.hpp"
#include "bioalert/bow.hpp"
#include "bioalert/corpus.hpp"
#include "bioalert/errors.hpp"
#include "bioalert/eval.hpp"
#include "bioalert/features.hpp"
#include "bioalert/glove.hpp"
#include "bioalert/model_io.hpp"
#include "bioalert/tsne.hpp"

namespace bioalert::cli {

// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

namespace detail {

inline void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir + ": " + ec.message());
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("write failed: " + path);
}

struct LoadedEmbeddings {
  std::shared_ptr<const EmbeddingTable> table;
  std::uint64_t checksum = 0;
};

inline LoadedEmbeddings load_embedding_file(const std::string& path) {
  LoadedEmbeddings out;
  out.table = std::make_shared<const EmbeddingTable>(load_embeddings(path));
  out.checksum = file_checksum(path);
  return out;
}

struct SplitPaths {
  std::vector<AlertDocument> train, dev, test;
};

// Explicit dev/test files win; otherwise a seeded 80/10/10 split of --corpus.
inline SplitPaths resolve_splits(const std::string& corpus_path, const std::string& dev_path,
                                 const std::string& test_path, std::uint64_t seed) {
  SplitPaths out;
  if (!dev_path.empty()) {
    out.train = load_corpus(corpus_path);
    out.dev = load_corpus(dev_path);
    if (!test_path.empty()) out.test = load_corpus(test_path);
    return out;
  }
  const auto all = load_corpus(corpus_path);
  SplitSpec spec;
  spec.seed = seed;
  auto split = split_dataset(all, spec);
  out.train = std::move(split.train);
  out.dev = std::move(split.dev);
  out.test = std::move(split.test);
  return out;
}

struct TrainFlags {
  std::string corpus, dev, embeddings, out_dir;
  std::string rep = "tf", view = "both";
  std::uint64_t seed = 0;
  double lambda = 1e-4;
  double threshold = 0.5;
  std::size_t hidden_size = 128;
  double learning_rate = 0.05;
  std::size_t batch_size = 32;
  int epochs = 30;
  int patience = 5;
  double input_dropout = 0.0;
  bool finetune_embeddings = false;
};

inline FitConfig make_fit_config(const TrainFlags& flags) {
  FitConfig config;
  config.rep = parse_representation(flags.rep);
  config.view = parse_view(flags.view);
  config.lambda = flags.lambda;
  config.threshold = flags.threshold;
  config.seed = flags.seed;
  config.hidden_size = flags.hidden_size;
  config.learning_rate = flags.learning_rate;
  config.batch_size = flags.batch_size;
  config.max_epochs = flags.epochs;
  config.patience = flags.patience;
  config.input_dropout = flags.input_dropout;
  config.finetune_embeddings = flags.finetune_embeddings;
  return config;
}

// Trains one configuration, wiring in embeddings when the representation
// needs them, and records the checksum the model file will reference.
inline FittedModels train_one(const SplitPaths& splits, const TrainFlags& flags,
                              const FitConfig& config, const std::string& out_dir) {
  std::shared_ptr<const EmbeddingTable> table;
  std::uint64_t checksum = 0;
  if (config.rep == Representation::Rnn) {
    if (flags.embeddings.empty())
      throw DataError("--embeddings is required for the rnn representation");
    auto loaded = load_embedding_file(flags.embeddings);
    table = loaded.table;
    checksum = loaded.checksum;
  }
  FittedModels fitted = fit_models(splits.train, splits.dev, table, config);
  if (config.rep == Representation::Rnn) {
    if (config.finetune_embeddings) {
      // tuned vectors are part of the model: persist them and reference the
      // tuned file instead of the input file
      const std::string tuned_path =
          (std::filesystem::path(out_dir) / "tuned_embeddings.txt").string();
      const EmbeddingTable* tuned =
          fitted.title_encoder ? fitted.title_encoder->embeddings.get()
                               : fitted.desc_encoder->embeddings.get();
      save_embeddings(tuned_path, *tuned);
      fitted.embedding_checksum = file_checksum(tuned_path);
    } else {
      fitted.embedding_checksum = checksum;
    }
  }
  return fitted;
}

inline void load_model_embeddings(FittedModels& fitted, const std::string& embeddings_path) {
  if (fitted.rep != Representation::Rnn) return;
  if (embeddings_path.empty())
    throw DataError("--embeddings is required to use an rnn model");
  auto loaded = load_embedding_file(embeddings_path);
  attach_embeddings(fitted, loaded.table, loaded.checksum);
}

inline std::vector<TokenSeq> tokenized_views(std::span<const AlertDocument> docs) {
  std::vector<TokenSeq> out;
  out.reserve(docs.size() * 2);
  for (const auto& d : docs) {
    out.push_back(tokenize(d.title));
    out.push_back(tokenize(d.description));
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands. Each returns an exit code; data/numeric errors propagate as
// exceptions and are mapped by run().

inline int cmd_ingest(const std::string& input, const std::string& output) {
  std::ifstream in(input);
  if (!in) throw DataError("cannot open input file: " + input);

  std::vector<AlertDocument> accepted;
  std::unordered_set<std::string> ids;
  std::size_t rejected = 0;
  std::optional<bool> labeled_mode;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      AlertDocument doc = bioalert::detail::parse_document(j);
      if (!ids.insert(doc.id).second) throw DataError("duplicate id \"" + doc.id + "\"");
      if (!labeled_mode) labeled_mode = doc.label.has_value();
      if (doc.label.has_value() != *labeled_mode)
        throw DataError("document \"" + doc.id + "\" " +
                        (*labeled_mode ? "lacks the label every prior record carries"
                                       : "carries a label in an unlabeled corpus"));
      accepted.push_back(std::move(doc));
    } catch (const std::exception& e) {
      ++rejected;
      std::cerr << input << ":" << line_no << ": rejected: " << e.what() << "\n";
    }
  }
  write_corpus(output, accepted);
  std::cout << accepted.size() << " accepted, " << rejected << " rejected\n";
  return rejected == 0 ? kExitOk : kExitData;
}

inline int cmd_stats(const std::string& corpus_path) {
  const auto docs = load_corpus(corpus_path);
  if (docs.empty()) throw DataError("empty corpus");
  std::vector<TokenSeq> titles, descriptions;
  titles.reserve(docs.size());
  descriptions.reserve(docs.size());
  for (const auto& d : docs) {
    titles.push_back(tokenize(d.title));
    descriptions.push_back(tokenize(d.description));
  }
  const CorpusStats title_stats = corpus_stats(titles);
  const CorpusStats desc_stats = corpus_stats(descriptions);
  char line[160];
  std::cout << "Corpus       Number of Texts  Vocabulary Size  Median length  Average Length\n";
  std::snprintf(line, sizeof(line), "%-12s %-16zu %-16zu %-14zu %.1f\n", "Title",
                title_stats.num_texts, title_stats.vocab_size, title_stats.median_length,
                title_stats.mean_length);
  std::cout << line;
  std::snprintf(line, sizeof(line), "%-12s %-16zu %-16zu %-14zu %.1f\n", "Description",
                desc_stats.num_texts, desc_stats.vocab_size, desc_stats.median_length,
                desc_stats.mean_length);
  std::cout << line;
  return kExitOk;
}

inline int cmd_split(const std::string& corpus_path, const SplitSpec& spec,
                     const std::string& out_dir) {
  const auto docs = load_corpus(corpus_path);
  const auto split = split_dataset(docs, spec);
  detail::ensure_directory(out_dir);
  const std::filesystem::path dir(out_dir);
  write_corpus((dir / "train.jsonl").string(), split.train);
  write_corpus((dir / "dev.jsonl").string(), split.dev);
  write_corpus((dir / "test.jsonl").string(), split.test);
  std::cout << "train " << split.train.size() << ", dev " << split.dev.size() << ", test "
            << split.test.size() << " (seed " << spec.seed << ")\n";
  return kExitOk;
}

struct EmbedFlags {
  std::vector<std::string> corpora;
  std::string out;
  int dim = 256;
  int window = 10;
  int epochs = 15;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
};

inline int cmd_embed(const EmbedFlags& flags) {
  std::vector<TokenSeq> sentences;
  for (const auto& path : flags.corpora) {
    const auto docs = load_corpus(path);
    auto views = detail::tokenized_views(docs);
    sentences.insert(sentences.end(), std::make_move_iterator(views.begin()),
                     std::make_move_iterator(views.end()));
  }
  if (sentences.empty()) throw DataError("no documents in the given corpora");
  const CooccurrenceTable table = build_cooccurrence(sentences, flags.window);
  GloveConfig config;
  config.dim = flags.dim;
  config.epochs = flags.epochs;
  config.learning_rate = flags.learning_rate;
  Rng rng(flags.seed);
  const GloveResult result = train_glove(table, config, rng);
  save_embeddings(flags.out, result.table);
  std::cout << "vocabulary " << result.table.words.size() << " words, dim " << flags.dim
            << "\nobjective " << result.objective_trace.front() << " -> "
            << result.objective_trace.back() << " over " << flags.epochs << " epochs (seed "
            << flags.seed << ")\n";
  return kExitOk;
}

inline int cmd_train(const detail::TrainFlags& flags) {
  const auto splits = detail::resolve_splits(flags.corpus, flags.dev, "", flags.seed);
  const FitConfig config = detail::make_fit_config(flags);
  detail::ensure_directory(flags.out_dir);
  const FittedModels fitted = detail::train_one(splits, flags, config, flags.out_dir);

  const std::filesystem::path dir(flags.out_dir);
  save_model((dir / "model.bin").string(), fitted);
  const EvalReport report = evaluate(fitted, splits.dev);
  detail::write_text_file((dir / "dev_report.json").string(), report_to_json(report).dump(2) + "\n");
  detail::write_text_file((dir / "dev_report.txt").string(), report_to_text(report));
  std::cout << "dev report (seed " << flags.seed << "):\n" << report_to_text(report);
  return kExitOk;
}

inline int cmd_evaluate(const std::string& model_path, const std::string& corpus_path,
                        const std::string& embeddings_path, const std::string& out_dir) {
  FittedModels fitted = load_model(model_path);
  detail::load_model_embeddings(fitted, embeddings_path);
  const auto docs = load_corpus(corpus_path);
  const EvalReport report = evaluate(fitted, docs);
  if (!out_dir.empty()) {
    detail::ensure_directory(out_dir);
    const std::filesystem::path dir(out_dir);
    detail::write_text_file((dir / "report.json").string(),
                            report_to_json(report).dump(2) + "\n");
    detail::write_text_file((dir / "report.txt").string(), report_to_text(report));
  }
  std::cout << report_to_text(report);
  return kExitOk;
}

struct PredictFlags {
  std::string model, corpus, embeddings, out;
  std::string title, description;
  bool has_pair = false;
};

inline int cmd_predict(const PredictFlags& flags) {
  FittedModels fitted = load_model(flags.model);
  detail::load_model_embeddings(fitted, flags.embeddings);

  std::vector<AlertDocument> docs;
  if (flags.has_pair) {
    AlertDocument doc;
    doc.id = "input";
    doc.title = flags.title;
    doc.description = flags.description;
    docs.push_back(std::move(doc));
  } else {
    docs = load_corpus(flags.corpus);
  }

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!flags.out.empty()) {
    file.open(flags.out);
    if (!file) throw DataError("cannot write " + flags.out);
    out = &file;
  }
  for (const auto& d : docs) {
    const Prediction pred = predict_document(fitted, d);
    nlohmann::json j;
    j["id"] = d.id;
    j["label"] = label_name(pred.label);
    j["probability"] = pred.probability;
    (*out) << j.dump() << "\n";
  }
  return kExitOk;
}

struct SearchFlags {
  detail::TrainFlags train;
  int budget = 10;
  std::optional<std::size_t> fixed_hidden;
};

inline SearchSpace default_search_space(Representation rep,
                                        std::optional<std::size_t> fixed_hidden) {
  SearchSpace space;
  ParamSpec lambda;
  lambda.kind = ParamSpec::Kind::LogUniform;
  lambda.lo = 1e-6;
  lambda.hi = 1e2;
  space.emplace_back("lambda", lambda);
  if (rep == Representation::Rnn) {
    ParamSpec lr;
    lr.kind = ParamSpec::Kind::LogUniform;
    lr.lo = 5e-3;
    lr.hi = 2e-1;
    space.emplace_back("learning_rate", lr);
    ParamSpec hidden;
    hidden.kind = ParamSpec::Kind::Choice;
    hidden.choices = fixed_hidden
                         ? std::vector<double>{static_cast<double>(*fixed_hidden)}
                         : std::vector<double>{16, 32, 64, 128};
    space.emplace_back("hidden_size", hidden);
    ParamSpec batch;
    batch.kind = ParamSpec::Kind::Choice;
    batch.choices = {16, 32, 64};
    space.emplace_back("batch_size", batch);
  }
  return space;
}

inline FitConfig apply_point(FitConfig config, const HyperPoint& point, std::uint64_t seed) {
  config.seed = seed;
  for (const auto& [name, value] : point) {
    if (name == "lambda") config.lambda = value;
    else if (name == "learning_rate") config.learning_rate = value;
    else if (name == "hidden_size") config.hidden_size = static_cast<std::size_t>(value);
    else if (name == "batch_size") config.batch_size = static_cast<std::size_t>(value);
    else throw DataError("unknown hyperparameter \"" + name + "\"");
  }
  return config;
}

inline int cmd_search(const SearchFlags& flags) {
  if (flags.budget < 1) throw DataError("--budget must be >= 1");
  const auto splits =
      detail::resolve_splits(flags.train.corpus, flags.train.dev, "", flags.train.seed);
  const FitConfig base_config = detail::make_fit_config(flags.train);
  detail::ensure_directory(flags.train.out_dir);

  std::shared_ptr<const EmbeddingTable> table;
  std::uint64_t checksum = 0;
  if (base_config.rep == Representation::Rnn) {
    if (flags.train.embeddings.empty())
      throw DataError("--embeddings is required for the rnn representation");
    auto loaded = detail::load_embedding_file(flags.train.embeddings);
    table = loaded.table;
    checksum = loaded.checksum;
  }

  const SearchSpace space = default_search_space(base_config.rep, flags.fixed_hidden);
  const TrialObjective objective = [&](const HyperPoint& point, std::uint64_t seed) {
    const FitConfig config = apply_point(base_config, point, seed);
    const FittedModels fitted = fit_models(splits.train, splits.dev, table, config);
    return evaluate(fitted, splits.dev);
  };
  Rng rng(flags.train.seed);
  const TrialLog log = random_search(space, flags.budget, objective, rng);

  const Trial& best = log.trials[log.selected];
  FittedModels best_model = fit_models(
      splits.train, splits.dev, table, apply_point(base_config, best.point, best.seed));
  if (base_config.rep == Representation::Rnn) best_model.embedding_checksum = checksum;

  const std::filesystem::path dir(flags.train.out_dir);
  detail::write_text_file((dir / "trial_log.json").string(),
                          trial_log_to_json(log).dump(2) + "\n");
  save_model((dir / "model.bin").string(), best_model);
  detail::write_text_file((dir / "dev_report.json").string(),
                          report_to_json(best.dev_metrics).dump(2) + "\n");
  std::cout << "best trial " << log.selected << " of " << flags.budget << ":\n"
            << report_to_text(best.dev_metrics);
  return kExitOk;
}

struct ProjectFlags {
  std::string model, vectors, corpus, embeddings, out_dir;
  std::string view;  // empty: the model's own view
  TsneConfig tsne;
};

inline int cmd_project(const ProjectFlags& flags) {
  std::vector<DenseVec> vectors;
  std::vector<std::optional<Label>> labels;
  std::vector<std::string> ids;
  std::string view_tag;

  if (!flags.vectors.empty()) {
    // external vector file: same shape as the embedding format, ids as words
    const EmbeddingTable table = load_embeddings(flags.vectors);
    view_tag = "vectors";
    for (std::size_t r = 0; r < table.words.size(); ++r) {
      ids.push_back(table.words[r]);
      DenseVec v(table.dim);
      for (std::size_t c = 0; c < table.dim; ++c) v[c] = table.vectors.at(r, c);
      vectors.push_back(std::move(v));
      labels.emplace_back(std::nullopt);
    }
  } else {
    FittedModels fitted = load_model(flags.model);
    detail::load_model_embeddings(fitted, flags.embeddings);
    if (!flags.view.empty()) fitted.view = parse_view(flags.view);
    view_tag = view_name(fitted.view);
    const auto docs = load_corpus(flags.corpus);
    for (const auto& d : docs) {
      const FeatureVec f = feature_vector(d, fitted);
      if (const auto* s = std::get_if<SparseVec>(&f)) vectors.push_back(to_dense(*s));
      else vectors.push_back(std::get<DenseVec>(f));
      labels.push_back(d.label);
      ids.push_back(d.id);
    }
  }

  const Projection projection = project(vectors, labels, flags.tsne);
  detail::ensure_directory(flags.out_dir);
  const std::filesystem::path dir(flags.out_dir);
  write_points_csv((dir / ("points_" + view_tag + ".csv")).string(), projection, ids);
  write_points_svg((dir / ("tsne_" + view_tag + ".svg")).string(), projection);
  nlohmann::json run_log;
  run_log["view"] = view_tag;
  run_log["points"] = projection.points.size();
  run_log["perplexity"] = flags.tsne.perplexity;
  run_log["iterations"] = flags.tsne.iterations;
  run_log["seed"] = flags.tsne.seed;
  run_log["kl_initial"] = projection.kl_initial;
  run_log["kl_final"] = projection.kl_final;
  detail::write_text_file((dir / ("projection_" + view_tag + ".json")).string(),
                          run_log.dump(2) + "\n");
  std::cout << "projected " << projection.points.size() << " points (view " << view_tag
            << "), kl " << projection.kl_initial << " -> " << projection.kl_final << "\n";
  return kExitOk;
}

struct SweepFlags {
  detail::TrainFlags train;
  std::string test;
  bool baselines = false;
  double nb_alpha = 1.0;
  double svm_c = 1.0;
};

// Trains and evaluates all nine (representation x view) configurations,
// reporting test metrics in the layout of the paper-style results table.
inline int cmd_sweep(const SweepFlags& flags) {
  auto splits = detail::resolve_splits(flags.train.corpus, flags.train.dev, flags.test,
                                       flags.train.seed);
  if (splits.test.empty())
    throw DataError("sweep needs a test set: pass --test with --dev, or let --corpus be split");
  detail::ensure_directory(flags.train.out_dir);

  std::string table_text =
      "Model  Text   Prec.  Rec.   F-scr. Acc.\n";
  nlohmann::json all = nlohmann::json::array();

  for (const Representation rep :
       {Representation::Tf, Representation::Lcr, Representation::Rnn}) {
    for (const View view : {View::Description, View::Title, View::Both}) {
      detail::TrainFlags one = flags.train;
      one.rep = representation_name(rep);
      one.view = view_name(view);
      const FitConfig config = detail::make_fit_config(one);
      const FittedModels fitted =
          detail::train_one(splits, one, config, flags.train.out_dir);
      const EvalReport report = evaluate(fitted, splits.test);
      char line[160];
      std::snprintf(line, sizeof(line), "%-6s %-6s %-6s %-6s %-6s %-6s\n",
                    representation_name(rep).c_str(), view_name(view).c_str(),
                    format_percent(report.precision).c_str(),
                    format_percent(report.recall).c_str(), format_percent(report.f1).c_str(),
                    format_percent(report.accuracy).c_str());
      table_text += line;
      all.push_back(report_to_json(report));

      const std::filesystem::path dir(flags.train.out_dir);
      save_model((dir / ("model_" + representation_name(rep) + "_" + view_name(view) + ".bin"))
                     .string(),
                 fitted);
    }
  }

  if (flags.baselines) {
    table_text += "-- tf-idf baselines (nb consumes raw term counts; svm consumes tf-idf) --\n";
    for (const View view : {View::Description, View::Title, View::Both}) {
      // independent per-view fits for the baseline classifiers
      FitConfig config;
      config.rep = Representation::Tf;
      config.view = view;
      config.seed = flags.train.seed;
      config.lambda = flags.train.lambda;
      FittedModels tf_fit = fit_models(splits.train, splits.dev, nullptr, config);

      std::vector<Label> train_labels;
      for (const auto& d : splits.train) train_labels.push_back(*d.label);

      const auto count_features = [&](const AlertDocument& d) {
        CountRow row;
        if (view == View::Title) {
          row = count_row(tokenize(d.title), *tf_fit.title_vocab);
        } else if (view == View::Description) {
          row = count_row(tokenize(d.description), *tf_fit.desc_vocab);
        } else {
          const CountRow desc = count_row(tokenize(d.description), *tf_fit.desc_vocab);
          const CountRow title = count_row(tokenize(d.title), *tf_fit.title_vocab);
          row.counts = bioalert::detail::concat_sparse(desc.counts, title.counts);
        }
        return row;
      };

      std::vector<CountRow> train_rows;
      std::vector<FeatureVec> train_tfidf;
      for (const auto& d : splits.train) {
        train_rows.push_back(count_features(d));
        train_tfidf.push_back(feature_vector(d, tf_fit));
      }

      const NaiveBayesModel nb = train_naive_bayes(train_rows, train_labels, flags.nb_alpha);
      Rng svm_rng(flags.train.seed);
      const LinearSvmModel svm =
          train_linear_svm(train_tfidf, train_labels, flags.svm_c, svm_rng);

      ConfusionMatrix nb_matrix, svm_matrix;
      for (const auto& d : splits.test) {
        if (!d.label) throw DataError("sweep: unlabeled document \"" + d.id + "\"");
        const bool is_event = *d.label == Label::Event;
        const bool nb_event = predict_naive_bayes(nb, count_features(d)).label == Label::Event;
        const bool svm_event = predict_svm(svm, feature_vector(d, tf_fit)) == Label::Event;
        (nb_event ? (is_event ? nb_matrix.tp : nb_matrix.fp)
                  : (is_event ? nb_matrix.fn : nb_matrix.tn))++;
        (svm_event ? (is_event ? svm_matrix.tp : svm_matrix.fp)
                   : (is_event ? svm_matrix.fn : svm_matrix.tn))++;
      }
      for (const auto& [name, matrix] :
           std::vector<std::pair<std::string, ConfusionMatrix>>{{"nb", nb_matrix},
                                                                {"svm", svm_matrix}}) {
        EvalReport report = compute_metrics(matrix);
        report.config.rep = Representation::Tf;
        report.config.view = view;
        report.config.seed = flags.train.seed;
        report.config.hyperparams[name == "nb" ? "alpha" : "svm_c"] =
            name == "nb" ? flags.nb_alpha : flags.svm_c;
        char line[160];
        std::snprintf(line, sizeof(line), "%-6s %-6s %-6s %-6s %-6s %-6s\n", name.c_str(),
                      view_name(view).c_str(), format_percent(report.precision).c_str(),
                      format_percent(report.recall).c_str(), format_percent(report.f1).c_str(),
                      format_percent(report.accuracy).c_str());
        table_text += line;
        nlohmann::json jr = report_to_json(report);
        jr["classifier"] = name;
        jr["note"] = name == "nb" ? "raw term counts input" : "tf-idf input";
        all.push_back(jr);
      }
    }
  }

  const std::filesystem::path dir(flags.train.out_dir);
  detail::write_text_file((dir / "sweep_report.txt").string(), table_text);
  detail::write_text_file((dir / "sweep_report.json").string(), all.dump(2) + "\n");
  std::cout << table_text;
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv) {
  CLI::App app{"multi-view biosurveillance alert classification"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "validate a raw JSONL feed into a corpus file");
  std::string ingest_input, ingest_out;
  ingest->add_option("--input", ingest_input, "raw JSONL file")->required();
  ingest->add_option("--out", ingest_out, "validated corpus path")->required();

  // stats
  auto* stats = app.add_subcommand("stats", "corpus statistics per view");
  std::string stats_corpus;
  stats->add_option("--corpus", stats_corpus, "corpus JSONL")->required();

  // split
  auto* split = app.add_subcommand("split", "deterministic train/dev/test split");
  std::string split_corpus, split_out;
  SplitSpec split_spec;
  split->add_option("--corpus", split_corpus, "labeled corpus JSONL")->required();
  split->add_option("--out", split_out, "output directory")->required();
  split->add_option("--seed", split_spec.seed, "shuffle seed");
  split->add_option("--train-fraction", split_spec.train_fraction, "train share");
  split->add_option("--dev-fraction", split_spec.dev_fraction, "dev share");
  split->add_option("--test-fraction", split_spec.test_fraction, "test share");

  // embed
  auto* embed = app.add_subcommand("embed", "train word embeddings on title+description text");
  EmbedFlags embed_flags;
  embed->add_option("--corpus", embed_flags.corpora, "corpus JSONL (repeatable)")->required();
  embed->add_option("--out", embed_flags.out, "embedding file to write")->required();
  embed->add_option("--dim", embed_flags.dim, "embedding width");
  embed->add_option("--window", embed_flags.window, "co-occurrence window");
  embed->add_option("--epochs", embed_flags.epochs, "training epochs");
  embed->add_option("--learning-rate", embed_flags.learning_rate, "adagrad base step");
  embed->add_option("--seed", embed_flags.seed, "rng seed");

  const auto add_train_flags = [](CLI::App* cmd, detail::TrainFlags& flags,
                                  bool corpus_required) {
    cmd->add_option("--corpus", flags.corpus, "labeled corpus (train, or full when no --dev)")
        ->required(corpus_required);
    cmd->add_option("--dev", flags.dev, "labeled dev corpus; omit to auto-split --corpus");
    cmd->add_option("--rep", flags.rep, "document representation")
        ->check(CLI::IsMember({"tf", "lcr", "rnn"}));
    cmd->add_option("--view", flags.view, "text view")
        ->check(CLI::IsMember({"title", "desc", "both"}));
    cmd->add_option("--seed", flags.seed, "rng seed");
    cmd->add_option("--out", flags.out_dir, "output directory")->required(corpus_required);
    cmd->add_option("--lambda", flags.lambda, "L2 strength");
    cmd->add_option("--threshold", flags.threshold, "decision threshold");
    cmd->add_option("--hidden-size", flags.hidden_size, "rnn hidden units per direction");
    cmd->add_option("--learning-rate", flags.learning_rate, "rnn adagrad base step");
    cmd->add_option("--batch-size", flags.batch_size, "rnn mini-batch size");
    cmd->add_option("--epochs", flags.epochs, "rnn epoch cap");
    cmd->add_option("--patience", flags.patience, "early-stopping patience");
    cmd->add_option("--dropout", flags.input_dropout, "rnn input dropout");
    cmd->add_flag("--finetune-embeddings", flags.finetune_embeddings,
                  "update embeddings during joint training");
    cmd->add_option("--embeddings", flags.embeddings, "embedding file (rnn)");
  };

  // train
  auto* train = app.add_subcommand("train", "train one (rep, view) configuration");
  detail::TrainFlags train_flags;
  add_train_flags(train, train_flags, true);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a model on a labeled corpus");
  std::string eval_model, eval_corpus, eval_embeddings, eval_out;
  evaluate->add_option("--model", eval_model, "model file")->required();
  evaluate->add_option("--corpus", eval_corpus, "labeled corpus")->required();
  evaluate->add_option("--embeddings", eval_embeddings, "embedding file (rnn)");
  evaluate->add_option("--out", eval_out, "report directory");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "label documents or a single pair");
  PredictFlags predict_flags;
  predict_cmd->add_option("--model", predict_flags.model, "model file")->required();
  predict_cmd->add_option("--corpus", predict_flags.corpus, "corpus JSONL");
  predict_cmd->add_option("--title", predict_flags.title, "single alert title");
  predict_cmd->add_option("--desc", predict_flags.description, "single alert description");
  predict_cmd->add_option("--embeddings", predict_flags.embeddings, "embedding file (rnn)");
  predict_cmd->add_option("--out", predict_flags.out, "output file (default stdout)");

  // search
  auto* search = app.add_subcommand("search", "random hyperparameter search");
  SearchFlags search_flags;
  add_train_flags(search, search_flags.train, true);
  search->add_option("--budget", search_flags.budget, "number of trials")->required();

  // project
  auto* project_cmd = app.add_subcommand("project", "2-D t-SNE of document representations");
  ProjectFlags project_flags;
  project_cmd->add_option("--model", project_flags.model, "model file");
  project_cmd->add_option("--vectors", project_flags.vectors,
                          "precomputed vector file (id v1 v2 ...)");
  project_cmd->add_option("--corpus", project_flags.corpus, "corpus JSONL");
  project_cmd->add_option("--embeddings", project_flags.embeddings, "embedding file (rnn)");
  project_cmd->add_option("--view", project_flags.view, "view override")
      ->check(CLI::IsMember({"title", "desc", "both"}));
  project_cmd->add_option("--out", project_flags.out_dir, "output directory")->required();
  project_cmd->add_option("--perplexity", project_flags.tsne.perplexity, "target perplexity");
  project_cmd->add_option("--iterations", project_flags.tsne.iterations, "descent iterations");
  project_cmd->add_option("--tsne-learning-rate", project_flags.tsne.learning_rate,
                          "descent step size");
  project_cmd->add_option("--seed", project_flags.tsne.seed, "rng seed");
  project_cmd->add_option("--max-points", project_flags.tsne.max_points,
                          "subsample cap");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "train and evaluate all nine configurations");
  SweepFlags sweep_flags;
  add_train_flags(sweep, sweep_flags.train, true);
  sweep->add_option("--test", sweep_flags.test, "labeled test corpus (with --dev)");
  sweep->add_flag("--baselines", sweep_flags.baselines, "also run nb and svm on tf features");
  sweep->add_option("--nb-alpha", sweep_flags.nb_alpha, "naive bayes smoothing");
  sweep->add_option("--svm-c", sweep_flags.svm_c, "svm regularization C");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(ingest_input, ingest_out);
    if (stats->parsed()) return cmd_stats(stats_corpus);
    if (split->parsed()) return cmd_split(split_corpus, split_spec, split_out);
    if (embed->parsed()) return cmd_embed(embed_flags);
    if (train->parsed()) return cmd_train(train_flags);
    if (evaluate->parsed())
      return cmd_evaluate(eval_model, eval_corpus, eval_embeddings, eval_out);
    if (predict_cmd->parsed()) {
      predict_flags.has_pair = predict_flags.corpus.empty();
      if (predict_flags.has_pair && predict_flags.title.empty() &&
          predict_flags.description.empty()) {
        std::cerr << "predict: pass --corpus, or --title/--desc for a single pair\n";
        return kExitUsage;
      }
      return cmd_predict(predict_flags);
    }
    if (search->parsed()) return cmd_search(search_flags);
    if (project_cmd->parsed()) {
      if (project_flags.vectors.empty() &&
          (project_flags.model.empty() || project_flags.corpus.empty())) {
        std::cerr << "project: pass --vectors, or --model with --corpus\n";
        return kExitUsage;
      }
      return cmd_project(project_flags);
    }
    if (sweep->parsed()) return cmd_sweep(sweep_flags);
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace bioalert::cli

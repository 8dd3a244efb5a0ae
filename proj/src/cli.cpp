#include "colloq/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "colloq/annotation_engine.hpp"
#include "colloq/annotation_service.hpp"
#include "colloq/corpus_store.hpp"
#include "colloq/embedding_store.hpp"
#include "colloq/harness.hpp"
#include "colloq/model_zoo.hpp"
#include "colloq/normalizer.hpp"
#include "json.hpp"

namespace colloq {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string join(const std::vector<std::size_t>& v, const char* sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + std::to_string(v[i]);
  return s;
}

std::string join(const std::vector<double>& v, const char* sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + format_real(v[i]);
  return s;
}

std::string architecture_table() {
  std::ostringstream s;
  s << "Architecture defaults:\n";
  for (Architecture arch : kAllArchitectures) {
    const Hyperparameters h = default_hyperparameters(arch);
    std::string name = to_string(arch);
    name.resize(9, ' ');
    s << "  " << name;
    if (h.filters) s << "conv " << h.filters << "x" << h.filter_size << ", ";
    if (!h.hidden_dims.empty()) s << "hidden " << join(h.hidden_dims, "/") << ", ";
    s << (arch == Architecture::BiGru ? "spatial dropout " : "dropout ")
      << join(h.dropout_rates, "/") << ", lr " << format_real(h.learning_rate)
      << ", " << h.epochs << " epochs, batch " << h.batch_size << "\n";
  }
  return s.str();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed for " + path.string());
}

EmojiInventory load_inventory(const std::string& path) {
  return path.empty() ? EmojiInventory::load_default() : EmojiInventory::load(path);
}

Clock clock_for(const std::string& timing) {
  return timing == "off" ? null_clock() : wall_clock();
}

struct TrainFlags {
  std::string arch;
  std::string corpus;
  std::string embeddings;
  std::uint64_t seed = 1;
  std::string out = "run";
  std::string config;
  std::size_t padded_length = 0;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> learning_rate;
  std::string timing = "wall";
  std::string inventory;
};

int cmd_train(const TrainFlags& f, std::ostream& out) {
  const Architecture arch = parse_architecture(f.arch);
  const EmbeddingTable table = load_text_vec(f.embeddings);
  const Normalizer normalizer(load_inventory(f.inventory));
  const auto records = read_labeled_tsv(f.corpus);
  const TokenizedCorpus corpus = tokenize(records, normalizer);
  SplitSpec spec;
  spec.seed = f.seed;
  const Split parts = split(corpus.labels, spec);

  ModelConfig config = default_config(arch);
  if (!f.config.empty()) config = config_from_json(read_file(f.config), config);
  config.seed = f.seed;
  if (f.epochs) config.hyper.epochs = *f.epochs;
  if (f.batch_size) config.hyper.batch_size = *f.batch_size;
  if (f.learning_rate) config.hyper.learning_rate = *f.learning_rate;
  if (config.embedding_dim != table.dim() && !f.config.empty() &&
      json::parse(read_file(f.config)).contains("embedding_dim")) {
    throw DataError("config embedding_dim " + std::to_string(config.embedding_dim) +
                    " does not match the embedding table (" + std::to_string(table.dim()) + ")");
  }
  config.embedding_dim = table.dim();
  config.padded_length = f.padded_length
                             ? f.padded_length
                             : std::max(padded_length_for(corpus, parts.train),
                                        config.hyper.filter_size);
  config.validate();

  LookupStats stats;
  const auto train_set = encode_examples(corpus, parts.train, table, config.padded_length, &stats);
  const auto val_set = encode_examples(corpus, parts.val, table, config.padded_length, &stats);
  const auto test_set = encode_examples(corpus, parts.test, table, config.padded_length, &stats);

  auto model = build(config);
  TrainOptions options;
  options.clock = clock_for(f.timing);
  options.on_epoch = [&](const EpochRecord& e) {
    out << "epoch " << e.epoch << ": train loss " << format_real(e.train_loss)
        << " acc " << format_real(e.train_accuracy) << ", val loss "
        << format_real(e.val_loss) << " acc " << format_real(e.val_accuracy) << "\n";
  };
  const TrainingTrace trace = train(*model, train_set, val_set, options);
  const MetricsReport metrics = evaluate(*model, test_set);

  const fs::path dir(f.out);
  fs::create_directories(dir);
  save_checkpoint(*model, table.fingerprint(), dir / "model.json");
  std::ostringstream csv;
  trace.write_csv(csv);
  write_file(dir / "trace.csv", csv.str());
  write_file(dir / "metrics.json",
             json{{"test", json::parse(metrics.to_json())},
                  {"split", {{"train", parts.train.size()},
                             {"test", parts.test.size()},
                             {"val", parts.val.size()}}},
                  {"padded_length", config.padded_length},
                  {"embedding_lookups", json::parse(stats.to_json())}}
                     .dump(2) + "\n");
  out << "test accuracy " << format_real(metrics.accuracy) << ", macro F1 "
      << format_real(metrics.macro_f1) << "\nwrote " << (dir / "model.json").string()
      << ", " << (dir / "trace.csv").string() << ", " << (dir / "metrics.json").string()
      << "\n";
  return 0;
}

void print_help_on_error(const CLI::App& app, const CLI::ParseError& e, std::ostream& err) {
  err << "error: " << e.what() << "\n\n";
  const CLI::App* target = &app;
  for (const auto* sub : app.get_subcommands()) target = sub;
  err << target->help();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Colloquial sentiment corpus toolkit", "colloq"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  app.footer("Exit codes: 0 success, 1 usage error, 2 data error.");

  std::string store_path = "corpus.store";
  std::string inventory_path;
  auto add_store = [&](CLI::App* sub) {
    sub->add_option("--store", store_path, "Record log of the corpus store")
        ->capture_default_str();
  };
  auto add_inventory = [&](CLI::App* sub) {
    sub->add_option("--inventory", inventory_path,
                    "Emoji inventory TSV (default: shipped inventory)");
  };

  // ingest
  std::string ingest_input;
  auto* ingest = app.add_subcommand("ingest", "Load JSONL posts into the store");
  add_store(ingest);
  ingest->add_option("--input", ingest_input, "JSONL file of posts")->required();

  // select
  SelectionConfig selection;
  std::vector<std::string> domains, authors;
  auto* select = app.add_subcommand(
      "select", "Filter stored posts and add the survivors as normalized documents");
  add_store(select);
  add_inventory(select);
  select->add_option("--min-comments", selection.min_comment_count, "Minimum comment count")
      ->capture_default_str();
  select->add_option("--min-likes", selection.min_like_count, "Minimum like count")
      ->capture_default_str();
  select->add_option("--domain", domains, "Allowed domain tag (repeatable; none = all)");
  select->add_option("--author", authors, "Allowed author id (repeatable; none = all)");
  select->add_option("--ad-marker", selection.ad_marker_patterns,
                     "Substring marking an advertisement (repeatable)");
  bool select_dry_run = false;
  select->add_flag("--dry-run", select_dry_run, "Print matching post ids only");

  // normalize
  bool normalize_report = false;
  auto* normalize_cmd = app.add_subcommand(
      "normalize", "Normalize stdin line by line; prints space-joined tokens");
  add_inventory(normalize_cmd);
  normalize_cmd->add_flag("--report", normalize_report,
                          "Print a JSON report per line instead of tokens");

  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string token;
  AdjudicationConfig adjudication;
  std::vector<std::string> annotators;
  auto* serve = app.add_subcommand("serve", "Run the annotation HTTP service");
  add_store(serve);
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--port", port, "Port (0 picks a free one)")->capture_default_str();
  serve->add_option("--token", token, "Shared token for X-Annotation-Token")
      ->envname("COLLOQ_TOKEN");
  serve->add_option("--annotators-per-item", adjudication.annotators_per_item,
                    "Labels collected per document and round")
      ->capture_default_str();
  serve->add_option("--probe-fraction", adjudication.probe_fraction,
                    "Share of round-1 tasks re-served for self-agreement")
      ->capture_default_str();
  serve->add_option("--probe-seed", adjudication.seed, "Seed for probe selection")
      ->capture_default_str();
  serve->add_option("--annotator", annotators, "Register an annotator id (repeatable)");

  // adjudicate
  std::string annotations_path;
  auto* adjudicate_cmd = app.add_subcommand(
      "adjudicate", "Apply the two-round majority rule to exported annotations");
  adjudicate_cmd->add_option("--annotations", annotations_path, "Annotation JSONL")
      ->required();
  adjudicate_cmd
      ->add_option("--annotators-per-item", adjudication.annotators_per_item,
                   "Labels expected per document and round")
      ->capture_default_str();

  // agreement
  auto* agreement = app.add_subcommand(
      "agreement", "Fleiss' kappa, raw agreement and self-agreement as JSON");
  agreement->add_option("--annotations", annotations_path, "Annotation JSONL")->required();
  agreement
      ->add_option("--annotators-per-item", adjudication.annotators_per_item,
                   "Ratings per item")
      ->capture_default_str();

  // stats
  std::string stats_corpus;
  auto* stats = app.add_subcommand(
      "stats", "Class, length and emoji statistics as JSON (store or labelled TSV)");
  add_store(stats);
  add_inventory(stats);
  stats->add_option("--corpus", stats_corpus, "Labelled TSV instead of the store");

  // train
  TrainFlags tf;
  auto* train_cmd = app.add_subcommand("train", "Train one architecture");
  train_cmd->add_option("--arch", tf.arch, "cnn, lstm, cnn_gru, bigru or bilstm")->required();
  train_cmd->add_option("--corpus", tf.corpus, "Labelled TSV corpus")->required();
  train_cmd->add_option("--embeddings", tf.embeddings, "Text vector file")->required();
  train_cmd->add_option("--seed", tf.seed, "Seed for split, init, shuffle, dropout")
      ->capture_default_str();
  train_cmd->add_option("--out", tf.out, "Output directory")->capture_default_str();
  train_cmd->add_option("--config", tf.config, "JSON overrides of the tabled defaults");
  train_cmd->add_option("--padded-length", tf.padded_length,
                        "Document length L (0: 99th percentile of train lengths)")
      ->capture_default_str();
  train_cmd->add_option("--epochs", tf.epochs, "Override epochs");
  train_cmd->add_option("--batch-size", tf.batch_size, "Override batch size");
  train_cmd->add_option("--learning-rate", tf.learning_rate, "Override learning rate");
  train_cmd->add_option("--timing", tf.timing, "Record epoch seconds (wall) or zeros (off)")
      ->check(CLI::IsMember({"wall", "off"}))
      ->capture_default_str();
  train_cmd->add_option("--inventory", tf.inventory, "Emoji inventory TSV");
  train_cmd->footer(architecture_table());

  // evaluate
  std::string model_path, embeddings_path, corpus_path;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Metrics of a checkpoint on a corpus");
  evaluate_cmd->add_option("--model", model_path, "Checkpoint JSON")->required();
  evaluate_cmd->add_option("--corpus", corpus_path, "Labelled TSV corpus")->required();
  evaluate_cmd->add_option("--embeddings", embeddings_path, "Text vector file")->required();
  add_inventory(evaluate_cmd);

  // compare
  std::vector<std::string> compare_embeddings;
  std::vector<std::string> compare_archs;
  std::string compare_out = "compare";
  std::uint64_t compare_seed = 1;
  std::size_t compare_length = 0;
  std::string compare_timing = "wall";
  auto* compare_cmd = app.add_subcommand(
      "compare", "Train and test every architecture x embedding cell");
  compare_cmd->add_option("--corpus", corpus_path, "Labelled TSV corpus")->required();
  compare_cmd->add_option("--embeddings", compare_embeddings,
                          "label=path of a text vector file (repeatable)")
      ->required();
  compare_cmd->add_option("--arch", compare_archs, "Architectures (default: all five)");
  compare_cmd->add_option("--seed", compare_seed, "Seed")->capture_default_str();
  compare_cmd->add_option("--out", compare_out, "Output directory")->capture_default_str();
  compare_cmd->add_option("--padded-length", compare_length,
                          "Document length L (0: 99th percentile of train lengths)")
      ->capture_default_str();
  compare_cmd->add_option("--timing", compare_timing, "wall or off")
      ->check(CLI::IsMember({"wall", "off"}))
      ->capture_default_str();
  add_inventory(compare_cmd);
  compare_cmd->footer(architecture_table());

  // predict
  std::string predict_text;
  auto* predict_cmd = app.add_subcommand(
      "predict", "Label text with a checkpoint (--text or one document per stdin line)");
  predict_cmd->add_option("--model", model_path, "Checkpoint JSON")->required();
  predict_cmd->add_option("--embeddings", embeddings_path, "Text vector file")->required();
  predict_cmd->add_option("--text", predict_text, "Text to label");
  add_inventory(predict_cmd);

  // export
  std::string export_output;
  auto* export_cmd = app.add_subcommand("export", "Write gold records as TSV");
  add_store(export_cmd);
  export_cmd->add_option("--output", export_output, "TSV path")->required();

  // synth
  std::size_t synth_docs = 300, synth_vocab = 50, synth_dim = 100;
  std::uint64_t synth_seed = 1;
  std::string synth_out = "synth";
  auto* synth = app.add_subcommand(
      "synth", "Generate a separable toy corpus and embedding table");
  synth->add_option("--docs", synth_docs, "Documents")->capture_default_str();
  synth->add_option("--vocab", synth_vocab, "Vocabulary size")->capture_default_str();
  synth->add_option("--dim", synth_dim, "Vector dimension")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Seed")->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory (corpus.tsv, embeddings.vec)")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    print_help_on_error(app, e, err);
    return 1;
  }

  try {
    if (*ingest) {
      CorpusStore store(store_path);
      const IngestResult r = store.ingest(ingest_input);
      for (const auto& d : r.diagnostics) {
        err << ingest_input << ":" << d.line << ": " << d.message << "\n";
      }
      out << "accepted " << r.accepted << ", rejected " << r.diagnostics.size() << "\n";
    } else if (*select) {
      selection.allowed_domains.insert(domains.begin(), domains.end());
      if (!authors.empty()) selection.author_allowlist.emplace(authors.begin(), authors.end());
      CorpusStore store(store_path);
      const auto posts = store.select(selection);
      if (select_dry_run) {
        for (const auto& p : posts) out << p.id << "\n";
      } else {
        const Normalizer normalizer(load_inventory(inventory_path));
        std::size_t added = 0;
        for (const auto& p : posts) added += store.add_document(make_document(p, normalizer));
        out << "selected " << posts.size() << ", new documents " << added << "\n";
      }
    } else if (*normalize_cmd) {
      const Normalizer normalizer(load_inventory(inventory_path));
      std::string line;
      while (std::getline(in, line)) {
        const NormalizationReport r = normalizer.normalize(line);
        if (!normalize_report) {
          out << join_tokens(r.tokens) << "\n";
          continue;
        }
        json spans = json::array();
        for (const auto& s : r.removed_spans) spans.push_back({{"kind", to_string(s.kind)}, {"text", s.text}});
        out << json{{"tokens", r.tokens}, {"emoji_count", r.emoji_count}, {"removed_spans", spans}}.dump()
            << "\n";
      }
    } else if (*serve) {
      CorpusStore store(store_path);
      AnnotationEngine engine(store, adjudication);
      for (const auto& a : annotators) engine.register_annotator(a);
      AnnotationService service(store, engine, ServiceConfig{token});
      const bool ok = service.serve(host, port, [&](int bound) {
        out << "listening on http://" << host << ":" << bound << "\n" << std::flush;
      });
      if (!ok) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
    } else if (*adjudicate_cmd) {
      std::ifstream file(annotations_path);
      if (!file) throw IoError("cannot read " + annotations_path);
      std::map<std::string, std::vector<Annotation>> by_doc;
      std::string line;
      std::size_t line_no = 0;
      while (std::getline(file, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
          const Annotation a = annotation_from_json(line);
          by_doc[a.doc_id].push_back(a);
        } catch (const DataError& e) {
          throw DataError(annotations_path + ": " + e.what(), line_no);
        }
      }
      for (const auto& [doc, list] : by_doc) {
        std::size_t round1 = 0;
        std::set<std::string> seen;
        for (const auto& a : list) round1 += a.round == 1 && seen.insert(a.annotator_id).second;
        json row{{"doc_id", doc}};
        if (round1 < adjudication.annotators_per_item) {
          row["outcome"] = "incomplete";
        } else {
          const Adjudication adj = adjudicate(list, adjudication);
          row["outcome"] = to_string(adj.outcome);
          if (adj.gold) {
            row["label"] = to_int(adj.gold->label);
            row["round"] = adj.gold->round;
            row["provenance"] = to_string(adj.gold->provenance);
          }
        }
        out << row.dump() << "\n";
      }
    } else if (*agreement) {
      std::ifstream file(annotations_path);
      if (!file) throw IoError("cannot read " + annotations_path);
      std::vector<Annotation> list;
      std::string line;
      std::size_t line_no = 0;
      while (std::getline(file, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
          list.push_back(annotation_from_json(line));
        } catch (const DataError& e) {
          throw DataError(annotations_path + ": " + e.what(), line_no);
        }
      }
      out << agreement_report(list, adjudication.annotators_per_item).to_json() << "\n";
    } else if (*stats) {
      if (!stats_corpus.empty()) {
        const Normalizer normalizer(load_inventory(inventory_path));
        std::vector<Document> docs;
        std::vector<GoldRecord> gold;
        for (const auto& r : read_labeled_tsv(stats_corpus)) {
          const auto report = normalizer.normalize(r.raw_text);
          docs.push_back({r.doc_id, r.raw_text, report.tokens, report.tokens.size(),
                          report.emoji_count, r.doc_id});
          gold.push_back({r.doc_id, r.label, 1, Provenance::UnanimousR1});
        }
        out << compute_stats(docs, gold).to_json() << "\n";
      } else {
        CorpusStore store(store_path);
        const auto docs = store.documents();
        const auto gold = store.gold();
        out << compute_stats(docs, gold).to_json() << "\n";
      }
    } else if (*train_cmd) {
      tf.inventory = tf.inventory.empty() ? inventory_path : tf.inventory;
      return cmd_train(tf, out);
    } else if (*evaluate_cmd) {
      const EmbeddingTable table = load_text_vec(embeddings_path);
      auto model = load_checkpoint(model_path, table.fingerprint());
      const Normalizer normalizer(load_inventory(inventory_path));
      const auto records = read_labeled_tsv(corpus_path);
      const TokenizedCorpus corpus = tokenize(records, normalizer);
      std::vector<std::size_t> all(records.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      const auto examples =
          encode_examples(corpus, all, table, model->config().padded_length);
      out << evaluate(*model, examples).to_json() << "\n";
    } else if (*compare_cmd) {
      std::map<std::string, EmbeddingTable> tables;
      std::vector<std::string> labels;
      for (const auto& spec : compare_embeddings) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0) {
          throw CLI::ValidationError("--embeddings", "expected label=path, got '" + spec + "'");
        }
        const std::string label = spec.substr(0, eq);
        if (label.find(',') != std::string::npos) {
          throw CLI::ValidationError("--embeddings", "label must not contain a comma");
        }
        tables.emplace(label, load_text_vec(spec.substr(eq + 1)));
        labels.push_back(label);
      }
      std::vector<Architecture> archs;
      for (const auto& a : compare_archs) archs.push_back(parse_architecture(a));
      if (archs.empty()) archs.assign(kAllArchitectures.begin(), kAllArchitectures.end());
      std::vector<CompareCell> cells;
      for (const auto& label : labels) {
        for (Architecture a : archs) cells.push_back({a, label});
      }
      const Normalizer normalizer(load_inventory(inventory_path));
      CompareOptions options;
      options.seed = compare_seed;
      options.split.seed = compare_seed;
      if (compare_length) options.padded_length = compare_length;
      options.clock = clock_for(compare_timing);
      options.log = [&](const std::string& msg) { out << msg << "\n" << std::flush; };
      const auto records = read_labeled_tsv(corpus_path);
      const auto results = compare(cells, records, tables, normalizer, compare_out, options);
      std::size_t failed = 0;
      for (const auto& r : results) failed += !r.ok;
      out << "wrote " << (fs::path(compare_out) / "comparison.csv").string() << " and "
          << (fs::path(compare_out) / "timing.csv").string() << "; " << failed
          << " failed cell(s)\n";
      return failed ? 2 : 0;
    } else if (*predict_cmd) {
      const EmbeddingTable table = load_text_vec(embeddings_path);
      auto model = load_checkpoint(model_path, table.fingerprint());
      const Normalizer normalizer(load_inventory(inventory_path));
      auto emit = [&](const std::string& text) {
        const auto tokens = normalizer.normalize(text).tokens;
        const Prediction p = predict(*model, tokens, table);
        out << json{{"label", to_int(p.label)}, {"probabilities", p.probabilities}}.dump()
            << "\n";
      };
      if (predict_cmd->count("--text")) {
        emit(predict_text);
      } else {
        std::string line;
        while (std::getline(in, line)) emit(line);
      }
    } else if (*export_cmd) {
      CorpusStore store(store_path);
      const auto records = labeled_corpus(store);
      out << "exported " << export_tsv(records, export_output) << "\n";
    } else if (*synth) {
      const SynthCorpus corpus = synth_corpus(synth_docs, synth_vocab, synth_seed, synth_dim);
      fs::create_directories(synth_out);
      export_tsv(corpus.records, fs::path(synth_out) / "corpus.tsv");
      save_text_vec(corpus.table, fs::path(synth_out) / "embeddings.vec");
      out << "wrote " << corpus.records.size() << " documents to "
          << (fs::path(synth_out) / "corpus.tsv").string() << "\n";
    }
  } catch (const CLI::ValidationError& e) {
    print_help_on_error(app, e, err);
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int run_cli(int argc, const char* const* argv) {
  return run_cli(argc, argv, std::cin, std::cout, std::cerr);
}

}  // namespace colloq

// Command-line front end: project, split, train, tag, eval, export-bias,
// synth and gradcheck.
//
// Exit codes: 0 ok, 2 usage or config, 3 data or I/O, 4 numeric failure.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "debias/debias.hpp"

namespace {

using namespace debias;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
}

// A malformed config file is a configuration problem, not a data problem.
KeyValues read_config(const std::string& path) {
  try {
    return read_key_values(path);
  } catch (const ParseError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// One sentence per line, whitespace-separated tokens; blank lines skipped.
std::vector<std::vector<std::string>> read_token_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::vector<std::string> toks;
    for (std::string w; ss >> w;) toks.push_back(w);
    if (!toks.empty()) out.push_back(std::move(toks));
  }
  return out;
}

// ---------------------------------------------------------------------------

struct ProjectArgs {
  std::string src, tgt, align, tagset_src, out;
  std::optional<std::string> scores;
  std::optional<std::size_t> top_n;
};

int cmd_project(const ProjectArgs& a) {
  if (a.top_n && !a.scores) throw UsageError("--top-n requires --scores");
  const TagSet tags = read_tagset(a.tagset_src);
  auto bundle = read_parallel_bundle(a.src, a.tgt, a.align, tags, a.scores);
  const std::size_t total = bundle.size();
  if (a.top_n) bundle = select_sentences(bundle, *a.top_n);
  const ProjectedCorpus projected = project_corpus(bundle, tags);
  write_projected(a.out, projected);
  const auto st = projection_stats(projected);
  std::cerr << "sentences " << st.sentences << " (of " << total << ")\ntokens " << st.tokens << "\nhard " << st.hard
            << "\nsoft " << st.soft << '\n';
  return kExitOk;
}

struct SplitArgs {
  std::string gold, tagset, train_out, dev_out, test_out;
  std::size_t tokens = 1000;
};

int cmd_split(const SplitArgs& a) {
  const GoldCorpus gold = read_two_column(a.gold, read_tagset(a.tagset));
  auto [train, rest] = take_first_tokens(gold, a.tokens);
  auto [dev, test] = split_dev_test(rest);
  write_two_column(a.train_out, train);
  write_two_column(a.dev_out, dev);
  write_two_column(a.test_out, test);
  std::cerr << "train " << train.size() << " sentences / " << train.token_count() << " tokens\ndev " << dev.size()
            << " sentences / " << dev.token_count() << " tokens\ntest " << test.size() << " sentences / "
            << test.token_count() << " tokens\n";
  return kExitOk;
}

struct TrainArgs {
  std::string gold_train, dev, tagset_gold, model_out, report_out;
  std::optional<std::string> projected, tagset_proj, config, mapping;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
};

// Reads a gold file, mapping fine tags to the target tagset when a mapping is given.
GoldCorpus read_gold(const std::string& path, const TagSet& tags, const std::optional<TagMapping>& mapping) {
  if (!mapping) return read_two_column(path, tags);
  return map_to_universal(read_two_column(path, mapping->fine), mapping->table, tags);
}

int cmd_train(const TrainArgs& a) {
  TrainConfig cfg;
  if (a.config) cfg.apply(read_config(*a.config));
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();

  const TagSet gold_tags = read_tagset(a.tagset_gold);
  std::optional<TagMapping> mapping;
  if (a.mapping) mapping = read_mapping(*a.mapping);
  const GoldCorpus train = read_gold(a.gold_train, gold_tags, mapping);
  const GoldCorpus dev = read_gold(a.dev, gold_tags, mapping);
  std::optional<ProjectedCorpus> projected;
  if (a.projected) projected = read_projected(*a.projected, a.tagset_proj ? read_tagset(*a.tagset_proj) : gold_tags);

  std::cerr << "gold-train " << train.token_count() << " tokens, dev " << dev.token_count() << " tokens";
  if (projected) std::cerr << ", projected " << projected->token_count() << " tokens";
  std::cerr << '\n';

  auto [model, report] = train_tagger(train, dev, projected ? &*projected : nullptr, cfg);
  for (const auto& e : report.epochs)
    std::cerr << e.stage << " epoch " << e.epoch << " loss " << e.train_loss << " dev " << e.dev_accuracy << '\n';
  save_model(model, a.model_out);
  write_text(a.report_out, report.to_text());
  return kExitOk;
}

struct TagArgs {
  std::string model, input;
  std::optional<std::string> out;
};

int cmd_tag(const TagArgs& a) {
  const Tagger model = load_model(a.model);
  const auto sentences = read_token_lines(a.input);
  if (sentences.empty()) throw DataError("no sentences in '" + a.input + "'");
  std::ofstream file;
  if (a.out) {
    file.open(*a.out);
    if (!file) throw IoError("cannot write '" + *a.out + "'");
  }
  std::ostream& os = a.out ? static_cast<std::ostream&>(file) : std::cout;
  for (const auto& s : sentences) {
    const auto tags = predict(model, s);
    for (std::size_t t = 0; t < s.size(); ++t) os << s[t] << '\t' << model.gold_tags.label(tags[t]) << '\n';
    os << '\n';
  }
  return kExitOk;
}

struct EvalArgs {
  std::string gold;
  std::optional<std::string> pred, model, tagset, csv_out;
};

int cmd_eval(const EvalArgs& a) {
  if (!a.pred == !a.model) throw UsageError("give exactly one of --pred or --model");
  std::optional<Tagger> model;
  TagSet tags;
  if (a.model) {
    model = load_model(*a.model);
    tags = model->gold_tags;
  } else {
    if (!a.tagset) throw UsageError("--pred needs --tagset");
    tags = read_tagset(*a.tagset);
  }
  const GoldCorpus gold = read_two_column(a.gold, tags);
  TagSequences pred;
  if (model) {
    pred = predict_all(*model, gold);
  } else {
    const GoldCorpus p = read_two_column(*a.pred, tags);
    for (std::size_t s = 0; s < std::min(p.size(), gold.size()); ++s)
      if (p.sentences[s].tokens != gold.sentences[s].tokens)
        throw DataError("sentence " + std::to_string(s + 1) + ": prediction tokens differ from gold");
    pred = gold_tags(p);
  }
  const EvalReport report = evaluate(pred, gold_tags(gold), tags);
  std::cout << report.to_text();
  if (a.csv_out) write_text(*a.csv_out, report.to_csv());
  return kExitOk;
}

struct ExportArgs {
  std::string model, out;
};

int cmd_export_bias(const ExportArgs& a) {
  export_bias(load_model(a.model), a.out);
  return kExitOk;
}

struct SynthArgs {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::string out_prefix;
};

int cmd_synth(const SynthArgs& a) {
  ExperimentConfig cfg;
  if (a.config) cfg.apply(read_config(*a.config));
  if (a.seed) cfg.seed = *a.seed;
  std::cerr << "running recovery experiment, master seed " << cfg.seed << '\n';
  const ExperimentReport rep = run_recovery_experiment(cfg);
  write_text(a.out_prefix + ".txt", rep.to_text());
  write_text(a.out_prefix + ".csv", rep.to_csv());
  std::cout << std::fixed << std::setprecision(4) << "annotated " << rep.acc_annotated << "\nprojected "
            << rep.acc_projected << "\ndebias " << rep.acc_debias << "\nchannel_agreement " << rep.agreement << '\n';
  return kExitOk;
}

struct GradcheckArgs {
  std::size_t seeds = 10;
  std::uint64_t first_seed = 1;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  bool ok = true;
  for (std::uint64_t s = a.first_seed; s < a.first_seed + a.seeds; ++s) {
    const auto prob = random_gradcheck_problem(s);
    const auto res = check_gradients(prob.params, prob.gold, prob.proj);
    std::cout << "seed " << s << ": " << res.checked << " components, " << res.failures << " failures, max abs error "
              << res.max_abs_error << '\n';
    if (!res.ok()) {
      std::cout << "  worst " << res.worst << '\n';
      ok = false;
    }
  }
  std::cout << (ok ? "gradient check passed\n" : "gradient check FAILED\n");
  return ok ? kExitOk : kExitNumeric;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BiLSTM POS tagger with a learned projection-bias layer"};
  app.require_subcommand(1);

  ProjectArgs pa;
  auto* project = app.add_subcommand("project", "Project source tags across word alignments");
  project->add_option("--src", pa.src, "Source side, token<TAB>tag")->required();
  project->add_option("--tgt", pa.tgt, "Target side, one sentence per line")->required();
  project->add_option("--align", pa.align, "Alignments, i-j pairs per line")->required();
  project->add_option("--scores", pa.scores, "Sentence alignment scores, one per line");
  project->add_option("--top-n", pa.top_n, "Keep the n best-scoring sentences");
  project->add_option("--tagset-src", pa.tagset_src, "Source tagset file")->required();
  project->add_option("--out", pa.out, "Projected corpus output")->required();

  SplitArgs sa;
  auto* split = app.add_subcommand("split", "Low-resource split: first N tokens for training, rest halved into dev/test");
  split->add_option("--gold", sa.gold)->required();
  split->add_option("--tagset", sa.tagset)->required();
  split->add_option("--tokens", sa.tokens, "Training token budget")->capture_default_str();
  split->add_option("--train-out", sa.train_out)->required();
  split->add_option("--dev-out", sa.dev_out)->required();
  split->add_option("--test-out", sa.test_out)->required();

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Two-stage training (stage two needs --projected)");
  train->add_option("--gold-train", ta.gold_train)->required();
  train->add_option("--dev", ta.dev)->required();
  train->add_option("--projected", ta.projected);
  train->add_option("--tagset-gold", ta.tagset_gold)->required();
  train->add_option("--tagset-proj", ta.tagset_proj);
  train->add_option("--mapping", ta.mapping, "fine<TAB>universal table applied to gold files");
  train->add_option("--config", ta.config, "key = value file");
  train->add_option("--set", ta.overrides, "key=value override (repeatable)");
  train->add_option("--seed", ta.seed);
  train->add_option("--model-out", ta.model_out)->required();
  train->add_option("--report-out", ta.report_out)->required();

  TagArgs tg;
  auto* tag = app.add_subcommand("tag", "Tag pre-tokenised text");
  tag->add_option("--model", tg.model)->required();
  tag->add_option("--input", tg.input, "One sentence per line")->required();
  tag->add_option("--out", tg.out);

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Per-token accuracy against gold");
  eval->add_option("--gold", ea.gold)->required();
  eval->add_option("--pred", ea.pred, "Predicted two-column file");
  eval->add_option("--model", ea.model, "Tag the gold tokens with this model instead");
  eval->add_option("--tagset", ea.tagset);
  eval->add_option("--csv-out", ea.csv_out);

  ExportArgs xa;
  auto* exp = app.add_subcommand("export-bias", "Write the learned bias matrix A as CSV");
  exp->add_option("--model", xa.model)->required();
  exp->add_option("--out", xa.out)->required();

  SynthArgs ya;
  auto* synth = app.add_subcommand("synth", "Synthetic recovery experiment");
  synth->add_option("--config", ya.config);
  synth->add_option("--seed", ya.seed);
  synth->add_option("--out-prefix", ya.out_prefix)->required();

  GradcheckArgs ga;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient check on random small models");
  grad->add_option("--seeds", ga.seeds)->capture_default_str();
  grad->add_option("--first-seed", ga.first_seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*project) return guarded([&] { return cmd_project(pa); });
  if (*split) return guarded([&] { return cmd_split(sa); });
  if (*train) return guarded([&] { return cmd_train(ta); });
  if (*tag) return guarded([&] { return cmd_tag(tg); });
  if (*eval) return guarded([&] { return cmd_eval(ea); });
  if (*exp) return guarded([&] { return cmd_export_bias(xa); });
  if (*synth) return guarded([&] { return cmd_synth(ya); });
  if (*grad) return guarded([&] { return cmd_gradcheck(ga); });
  return kExitUsage;
}

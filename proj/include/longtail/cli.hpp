#pragma once

// Command-line front end: count, norm-table, norm-stats, train, generate,
// eval, synth and replay. Every subcommand that writes --out also writes
// `<out>.manifest.tsv`, which `replay` turns back into the same invocation.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "longtail/corpus.hpp"
#include "longtail/detail/text.hpp"
#include "longtail/error.hpp"
#include "longtail/metrics.hpp"
#include "longtail/ngram_stats.hpp"
#include "longtail/normalization.hpp"
#include "longtail/tiny_lm.hpp"
#include "longtail/zipf_corpus.hpp"

namespace longtail::cli {

inline constexpr std::string_view kToolVersion = "1.0.0";

namespace detail {

using longtail::detail::format_double;

inline std::string to_text(const std::string& v) { return v; }
inline std::string to_text(double v) { return format_double(v); }
template <typename T>
  requires std::is_integral_v<T>
std::string to_text(T v) {
  return std::to_string(v);
}

// Registers options with CLI11 and remembers how to print their resolved
// values into a manifest.
class ArgRecorder {
 public:
  template <typename T>
  CLI::Option* option(CLI::App& app, const std::string& name, T& var, const std::string& help) {
    entries_.push_back({name, false, [&var] { return std::vector<std::string>{to_text(var)}; }});
    return app.add_option("--" + name, var, help);
  }

  CLI::Option* option(CLI::App& app, const std::string& name, std::vector<std::string>& var, const std::string& help) {
    entries_.push_back({name, false, [&var] { return var; }});
    return app.add_option("--" + name, var, help);
  }

  CLI::Option* flag(CLI::App& app, const std::string& name, bool& var, const std::string& help) {
    entries_.push_back({name, true, [&var] { return std::vector<std::string>{var ? "1" : "0"}; }});
    return app.add_flag("--" + name, var, help);
  }

  void write(std::ostream& out) const {
    for (const auto& e : entries_) {
      for (const auto& v : e.values()) {
        if (v.find_first_of("\t\n\r") != std::string::npos)
          throw Error("manifest: value of --" + e.name + " contains a tab or newline");
        // An empty string option is the same as leaving it out.
        if (!e.flag && v.empty()) continue;
        out << (e.flag ? "flag." : "arg.") << e.name << '\t' << v << '\n';
      }
    }
  }

 private:
  struct Entry {
    std::string name;
    bool flag;
    std::function<std::vector<std::string>()> values;
  };
  std::vector<Entry> entries_;
};

// Writes to a sibling temporary file, then renames, so a failed run never
// leaves a half-written output behind.
inline void write_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    body(out);
    out.flush();
    if (!out) throw Error("write to '" + path + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot move '" + tmp + "' into place: " + ec.message());
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return in;
}

inline Vocabulary read_vocab(const std::string& path) {
  auto in = open_input(path);
  try {
    return load_vocab(in);
  } catch (const ParseError& e) {
    throw Error(path + ": " + e.what());
  }
}

inline FreqTable read_table(const std::string& path, const Vocabulary& vocab) {
  auto in = open_input(path);
  try {
    return load_table(in, vocab);
  } catch (const ParseError& e) {
    throw Error(path + ": " + e.what());
  }
}

inline NormTable read_norm_table(const std::string& path, const Vocabulary& vocab) {
  auto in = open_input(path);
  try {
    return load_norm_table(in, vocab);
  } catch (const ParseError& e) {
    throw Error(path + ": " + e.what());
  }
}

inline Checkpoint read_checkpoint(const std::string& path) {
  auto in = open_input(path);
  try {
    return load_checkpoint(in);
  } catch (const ParseError& e) {
    throw Error(path + ": " + e.what());
  }
}

inline bool is_blank(std::string_view s) { return s.find_first_not_of(" \t\r\f\v") == std::string_view::npos; }

// Non-blank lines of every input, in order.
inline std::vector<std::string> read_sentences(const std::vector<std::string>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths)
    for (auto& line : read_lines(p))
      if (!is_blank(line)) out.push_back(std::move(line));
  return out;
}

inline std::vector<std::vector<std::string>> tokenize_all(const std::vector<std::string>& lines,
                                                          const TokenizerConfig& cfg, unsigned workers) {
  std::vector<std::vector<std::string>> out(lines.size());
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(lines.size() / 1024 + 1)));
  const std::size_t chunk = (lines.size() + workers - 1) / workers;
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w * chunk; i < std::min(lines.size(), (w + 1) * chunk); ++i) out[i] = tokenize(lines[i], cfg);
    });
  }
  return out;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto part : longtail::detail::split(s, ','))
    if (!part.empty()) out.emplace_back(part);
  return out;
}

struct TokenizerFlags {
  bool lowercase = false;
  bool no_mask_numbers = false;
  bool no_split_punct = false;

  void add(CLI::App& app, ArgRecorder& rec) {
    rec.flag(app, "lowercase", lowercase, "Lowercase ASCII letters");
    rec.flag(app, "no-mask-numbers", no_mask_numbers, "Keep numbers instead of mapping them to <NUMBER>");
    rec.flag(app, "no-split-punct", no_split_punct, "Do not split leading/trailing punctuation");
  }

  TokenizerConfig config() const { return {lowercase, !no_mask_numbers, !no_split_punct}; }
};

struct Command {
  CLI::App* app = nullptr;
  ArgRecorder rec;
  std::string out;  // manifest is written next to this path when non-empty
  std::function<void(std::ostream&)> run;
};

inline void write_manifest(const std::string& name, const Command& cmd, double seconds) {
  write_file(cmd.out + ".manifest.tsv", [&](std::ostream& m) {
    m << "subcommand\t" << name << '\n';
    m << "tool_version\t" << kToolVersion << '\n';
    cmd.rec.write(m);
    m << "duration_seconds\t" << format_double(seconds) << '\n';
  });
}

inline void add_count(CLI::App& root, std::map<std::string, std::unique_ptr<Command>>& cmds) {
  auto& c = *(cmds["count"] = std::make_unique<Command>());
  c.app = root.add_subcommand("count", "Count unigrams and bigrams and build the vocabulary");
  struct P {
    std::vector<std::string> inputs;
    TokenizerFlags tok;
    Count min_freq = kDefaultMinFreq;
    std::size_t max_vocab = kDefaultMaxVocab;
    std::string vocab_out;
    unsigned threads = 1;
  };
  auto p = std::make_shared<P>();
  c.rec.option(*c.app, "input", p->inputs, "Text files, one sentence per line")->required()->expected(1, -1);
  p->tok.add(*c.app, c.rec);
  c.rec.option(*c.app, "min-freq", p->min_freq, "Minimum token count kept in the vocabulary")->capture_default_str();
  c.rec.option(*c.app, "max-vocab", p->max_vocab, "Maximum vocabulary size, specials included")->capture_default_str();
  c.rec.option(*c.app, "out", c.out, "Frequency table output")->required();
  c.rec.option(*c.app, "vocab-out", p->vocab_out, "Vocabulary output (default <out>.vocab)");
  c.rec.option(*c.app, "threads", p->threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  c.run = [p, &c](std::ostream& out) {
    if (p->vocab_out.empty()) p->vocab_out = c.out + ".vocab";
    const auto lines = read_sentences(p->inputs);
    const auto tokens = tokenize_all(lines, p->tok.config(), p->threads);
    TokenCounter counter;
    Count total = 0;
    for (const auto& s : tokens) {
      counter.add_all(s);
      total += s.size();
    }
    const auto vocab = build_vocab(counter, p->min_freq, p->max_vocab);
    std::vector<TokenSequence> seqs;
    seqs.reserve(tokens.size());
    for (const auto& s : tokens) seqs.push_back(encode(s, vocab));
    const auto table = count_ngrams_parallel(seqs, vocab, p->threads);
    write_file(p->vocab_out, [&](std::ostream& o) { save_vocab(vocab, o); });
    write_file(c.out, [&](std::ostream& o) { save_table(table, vocab, o); });
    out << "distinct_words\t" << counter.counts().size() << '\n'
        << "vocab_size\t" << vocab.size() << '\n'
        << "total_words\t" << total << '\n'
        << "sentences\t" << lines.size() << '\n';
  };
}

inline void add_norm_table(CLI::App& root, std::map<std::string, std::unique_ptr<Command>>& cmds) {
  auto& c = *(cmds["norm-table"] = std::make_unique<Command>());
  c.app = root.add_subcommand("norm-table", "Build a top-K normalization table");
  struct P {
    std::string freq, vocab, method;
    std::size_t k = kDefaultTopK;
    double epsilon = 0.0;
    double default_weight = 1.0;
    CLI::Option* eps_opt = nullptr;
  };
  auto p = std::make_shared<P>();
  c.rec.option(*c.app, "freq", p->freq, "Frequency table from `count`")->required();
  c.rec.option(*c.app, "vocab", p->vocab, "Vocabulary (default <freq>.vocab)");
  c.rec.option(*c.app, "method", p->method, "nonn, ln, mn or lmn")->required();
  c.rec.option(*c.app, "k", p->k, "Successors kept per context")->capture_default_str();
  p->eps_opt = c.rec.option(*c.app, "epsilon", p->epsilon, "Smoothing constant (default 1.1 for ln/lmn, 0.1 for mn)");
  c.rec.option(*c.app, "default-weight", p->default_weight, "Weight of successors outside the top K")
      ->capture_default_str();
  c.rec.option(*c.app, "out", c.out, "Norm table output")->required();
  c.run = [p, &c](std::ostream& out) {
    const auto method = parse_norm_method(p->method);
    if (!method) throw Error("unknown method '" + p->method + "' (expected nonn, ln, mn or lmn)");
    if (p->vocab.empty()) p->vocab = p->freq + ".vocab";
    if (p->eps_opt->count() == 0) p->epsilon = default_epsilon(*method);
    const auto vocab = read_vocab(p->vocab);
    const auto freq = read_table(p->freq, vocab);
    NormConfig cfg{*method, p->k, p->epsilon, p->default_weight};
    const auto table = build_norm_table(freq, cfg);
    write_file(c.out, [&](std::ostream& o) { save_norm_table(table, vocab, o); });
    out << "rows\t" << table.rows().size() << '\n';
  };
}

inline void add_norm_stats(CLI::App& root, std::map<std::string, std::unique_ptr<Command>>& cmds) {
  auto& c = *(cmds["norm-stats"] = std::make_unique<Command>());
  c.app = root.add_subcommand("norm-stats", "Weight statistics over a word's most frequent successors");
  struct P {
    std::string freq, vocab, word, methods = "all";
    std::size_t top_n = 500;
  };
  auto p = std::make_shared<P>();
  c.rec.option(*c.app, "freq", p->freq, "Frequency table from `count`")->required();
  c.rec.option(*c.app, "vocab", p->vocab, "Vocabulary (default <freq>.vocab)");
  c.rec.option(*c.app, "word", p->word, "Context word")->required();
  c.rec.option(*c.app, "top-n", p->top_n, "Number of successors")->capture_default_str();
  c.rec.option(*c.app, "methods", p->methods, "Comma-separated methods or `all`")->capture_default_str();
  c.rec.option(*c.app, "out", c.out, "Output TSV (default stdout)");
  c.run = [p, &c](std::ostream& out) {
    if (p->vocab.empty()) p->vocab = p->freq + ".vocab";
    std::vector<NormMethod> methods;
    if (p->methods == "all") {
      methods.assign(std::begin(kAllNormMethods), std::end(kAllNormMethods));
    } else {
      for (const auto& m : split_list(p->methods)) {
        auto parsed = parse_norm_method(m);
        if (!parsed) throw Error("unknown method '" + m + "'");
        methods.push_back(*parsed);
      }
    }
    if (methods.empty()) throw Error("no methods selected");
    if (p->top_n < 1) throw Error("--top-n must be >= 1");
    const auto vocab = read_vocab(p->vocab);
    const auto freq = read_table(p->freq, vocab);
    const auto a = vocab.find(p->word);
    if (!a || freq.successors(*a) == nullptr) throw Error("word '" + p->word + "' has no successors in the table");

    const auto top = top_k_next(freq, *a, p->top_n);
    std::vector<std::vector<double>> series;
    for (auto m : methods) series.push_back(norm_series(freq, m, *a, p->top_n));
    auto emit = [&](std::ostream& o) {
      o << "method\tmean\tstddev\tn\n";
      for (std::size_t i = 0; i < methods.size(); ++i) {
        const auto s = summarize(series[i]);
        o << to_string(methods[i]) << '\t' << format_double(s.mean) << '\t' << format_double(s.stddev) << '\t' << s.n
          << '\n';
      }
      o << "\nrank\tnext\tcount";
      for (auto m : methods) o << '\t' << to_string(m);
      o << '\n';
      for (std::size_t r = 0; r < top.size(); ++r) {
        o << r + 1 << '\t' << vocab.token(top[r].next) << '\t' << top[r].count;
        for (const auto& s : series) o << '\t' << format_double(s[r]);
        o << '\n';
      }
    };
    if (c.out.empty())
      emit(out);
    else
      write_file(c.out, emit);
  };
}

inline void add_train(CLI::App& root, std::map<std::string, std::unique_ptr<Command>>& cmds) {
  auto& c = *(cmds["train"] = std::make_unique<Command>());
  c.app = root.add_subcommand("train", "Train the bigram language model");
  struct P {
    std::string corpus, vocab, loss = "standard", norm_table;
    TokenizerFlags tok;
    double lr = 1e-4;
    std::size_t batch = 256, epochs = 1, dim = 32;
    std::uint64_t seed = 0;
  };
  auto p = std::make_shared<P>();
  c.rec.option(*c.app, "corpus", p->corpus, "Training text, one sentence per line")->required();
  c.rec.option(*c.app, "vocab", p->vocab, "Vocabulary from `count`")->required();
  c.rec.option(*c.app, "loss", p->loss, "standard or normalized")->capture_default_str();
  c.rec.option(*c.app, "norm-table", p->norm_table, "Norm table (required for normalized loss)");
  p->tok.add(*c.app, c.rec);
  c.rec.option(*c.app, "lr", p->lr, "Adam learning rate")->capture_default_str();
  c.rec.option(*c.app, "batch", p->batch, "Minibatch size")->capture_default_str();
  c.rec.option(*c.app, "epochs", p->epochs, "Passes over the corpus")->capture_default_str();
  c.rec.option(*c.app, "seed", p->seed, "Seed for initialization and shuffling")->capture_default_str();
  c.rec.option(*c.app, "dim", p->dim, "Embedding dimension")->capture_default_str();
  c.rec.option(*c.app, "out", c.out, "Checkpoint output; the loss trace goes to <out>.loss.tsv")->required();
  c.run = [p, &c](std::ostream& out) {
    TrainConfig cfg;
    if (p->loss == "standard") {
      cfg.loss_mode = LossMode::Standard;
      if (!p->norm_table.empty()) throw Error("--norm-table is only used with --loss normalized");
    } else if (p->loss == "normalized") {
      cfg.loss_mode = LossMode::Normalized;
      if (p->norm_table.empty()) throw Error("--loss normalized requires --norm-table");
    } else {
      throw Error("unknown loss '" + p->loss + "' (expected standard or normalized)");
    }
    const auto vocab = read_vocab(p->vocab);
    if (!p->norm_table.empty()) cfg.norm_table = std::make_shared<NormTable>(read_norm_table(p->norm_table, vocab));
    cfg.learning_rate = p->lr;
    cfg.batch_size = p->batch;
    cfg.epochs = p->epochs;
    cfg.seed = p->seed;

    const auto tok = p->tok.config();
    std::vector<TokenSequence> corpus;
    for (const auto& line : read_sentences({p->corpus})) corpus.push_back(encode(tokenize(line, tok), vocab));
    const auto result = train(init_model(vocab.size(), p->dim, p->seed), corpus, cfg);

    write_file(c.out + ".loss.tsv", [&](std::ostream& o) {
      o << "epoch\tloss\n";
      for (std::size_t e = 0; e < result.epoch_losses.size(); ++e)
        o << e + 1 << '\t' << format_double(result.epoch_losses[e]) << '\n';
    });
    write_file(c.out, [&](std::ostream& o) { save_checkpoint({result.params, vocab, tok}, o); });
    out << "final_loss\t" << format_double(result.epoch_losses.back()) << '\n';
  };
}

inline void add_generate(CLI::App& root, std::map<std::string, std::unique_ptr<Command>>& cmds) {
  auto& c = *(cmds["generate"] = std::make_unique<Command>());
  c.app = root.add_subcommand("generate", "Generate one sentence per prompt line");
  struct P {
    std::string model, prompts, strategy = "greedy", norm_table;
    double temperature = 1.0;
    std::size_t max_len = 20;
    std::uint64_t seed = 0;
  };
  auto p = std::make_shared<P>();
  c.rec.option(*c.app, "model", p->model, "Checkpoint from `train`")->required();
  c.rec.option(*c.app, "prompts", p->prompts, "Prompt file; the last token of each line starts decoding")->required();
  c.rec.option(*c.app, "strategy", p->strategy, "greedy or sample")->capture_default_str();
  c.rec.option(*c.app, "temperature", p->temperature, "Sampling temperature")->capture_default_str();
  c.rec.option(*c.app, "max-len", p->max_len, "Maximum generated tokens per line")->capture_default_str();
  c.rec.option(*c.app, "seed", p->seed, "Sampling seed")->capture_default_str();
  c.rec.option(*c.app, "norm-table", p->norm_table, "Reweight every decoding step with this table");
  c.rec.option(*c.app, "out", c.out, "Generated text output")->required();
  c.run = [p, &c](std::ostream& out) {
    DecodeConfig cfg;
    if (p->strategy == "greedy")
      cfg.strategy = DecodeStrategy::Greedy;
    else if (p->strategy == "sample")
      cfg.strategy = DecodeStrategy::Sample;
    else
      throw Error("unknown strategy '" + p->strategy + "' (expected greedy or sample)");
    cfg.temperature = p->temperature;
    cfg.max_len = p->max_len;
    cfg.seed = p->seed;
    cfg.validate();

    const auto ck = read_checkpoint(p->model);
    std::unique_ptr<NormTable> table;
    if (!p->norm_table.empty()) table = std::make_unique<NormTable>(read_norm_table(p->norm_table, ck.vocab));
    const auto prompts = read_lines(p->prompts);
    longtail::detail::Rng rng(cfg.seed, /*stream=*/2);
    std::size_t lines = 0;
    write_file(c.out, [&](std::ostream& o) {
      for (const auto& prompt : prompts) {
        const auto toks = tokenize(prompt, ck.tokenizer);
        const TokenId start = toks.empty() ? kBosId : ck.vocab.lookup(toks.back());
        const auto words = decode(generate(ck.params, start, cfg, table.get(), rng), ck.vocab);
        for (std::size_t i = 0; i < words.size(); ++i) o << (i ? " " : "") << words[i];
        o << '\n';
        ++lines;
      }
    });
    out << "generated\t" << lines << '\n';
  };
}

inline void add_eval(CLI::App& root, std::map<std::string, std::unique_ptr<Command>>& cmds) {
  auto& c = *(cmds["eval"] = std::make_unique<Command>());
  c.app = root.add_subcommand("eval", "Diversity, informativeness, entropy and BLEU of generated text");
  struct P {
    std::string generated, references, pos_lexicon, bigram_words;
    Count min_freq = 1, bigram_min_freq = kDefaultBigramReportMinFreq;
    bool pretty = false;
  };
  auto p = std::make_shared<P>();
  c.rec.option(*c.app, "generated", p->generated, "Generated text, one sentence per line")->required();
  c.rec.option(*c.app, "references", p->references, "Reference text aligned with --generated (enables BLEU)");
  c.rec.option(*c.app, "pos-lexicon", p->pos_lexicon, "POS lexicon (enables noun/verb counts)");
  c.rec.option(*c.app, "min-freq", p->min_freq, "Minimum frequency for distinct n-grams")->capture_default_str();
  c.rec.option(*c.app, "bigram-words", p->bigram_words, "Comma-separated start words for the bigram report");
  c.rec.option(*c.app, "bigram-min-freq", p->bigram_min_freq, "Bigram report counts bigrams above this frequency")
      ->capture_default_str();
  c.rec.flag(*c.app, "pretty", p->pretty, "Aligned table instead of TSV");
  c.rec.option(*c.app, "out", c.out, "Report output (default stdout)");
  c.run = [p, &c](std::ostream& out) {
    const auto generated = read_lines(p->generated);
    const auto corpus = split_corpus(generated);
    EvalOptions opt;
    opt.min_freq = p->min_freq;
    opt.bigram_min_freq = p->bigram_min_freq;
    opt.bigram_start_words = split_list(p->bigram_words);
    GeneratedCorpus refs;
    if (!p->references.empty()) {
      const auto ref_lines = read_lines(p->references);
      if (ref_lines.size() != generated.size())
        throw Error("--references has " + std::to_string(ref_lines.size()) + " lines but --generated has " +
                    std::to_string(generated.size()));
      refs = split_corpus(ref_lines);
      opt.references = &refs;
    }
    PosLexicon lex;
    if (!p->pos_lexicon.empty()) {
      auto in = open_input(p->pos_lexicon);
      try {
        lex = load_pos_lexicon(in);
      } catch (const ParseError& e) {
        throw Error(p->pos_lexicon + ": " + e.what());
      }
      opt.lexicon = &lex;
    }
    const auto report = evaluate(corpus, opt);
    auto emit = [&](std::ostream& o) {
      if (p->pretty)
        write_report_pretty(report, o);
      else
        write_report_tsv(report, o);
    };
    if (c.out.empty())
      emit(out);
    else
      write_file(c.out, emit);
  };
}

inline void add_synth(CLI::App& root, std::map<std::string, std::unique_ptr<Command>>& cmds) {
  auto& c = *(cmds["synth"] = std::make_unique<Command>());
  c.app = root.add_subcommand("synth", "Write a synthetic Zipf-distributed corpus");
  auto p = std::make_shared<ZipfCorpusConfig>();
  c.rec.option(*c.app, "vocab-size", p->vocab_size, "Number of distinct words")->capture_default_str();
  c.rec.option(*c.app, "sentences", p->sentences, "Number of sentences")->capture_default_str();
  c.rec.option(*c.app, "exponent", p->exponent, "Zipf exponent")->capture_default_str();
  c.rec.option(*c.app, "end-prob", p->end_prob, "Probability of ending after each word")->capture_default_str();
  c.rec.option(*c.app, "global-mix", p->global_mix, "Share of successors drawn from the global law")
      ->capture_default_str();
  c.rec.option(*c.app, "max-len", p->max_len, "Maximum sentence length")->capture_default_str();
  c.rec.option(*c.app, "seed", p->seed, "Generator seed")->capture_default_str();
  c.rec.option(*c.app, "out", c.out, "Corpus output")->required();
  c.run = [p, &c](std::ostream& out) {
    const auto lines = generate_zipf_corpus(*p);
    write_file(c.out, [&](std::ostream& o) {
      for (const auto& l : lines) o << l << '\n';
    });
    out << "sentences\t" << lines.size() << '\n';
  };
}

// Rebuilds the argument list recorded in a manifest.
inline std::vector<std::string> manifest_args(const std::string& path) {
  auto in = open_input(path);
  longtail::detail::LineReader reader(in);
  std::string line;
  std::vector<std::string> args;
  std::string subcommand;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path + ": expected key<TAB>value", reader.line_no());
    const std::string key = line.substr(0, tab), value = line.substr(tab + 1);
    if (key == "subcommand") {
      subcommand = value;
    } else if (key.starts_with("arg.")) {
      args.push_back("--" + key.substr(4) + "=" + value);
    } else if (key.starts_with("flag.")) {
      if (value != "0" && value != "1") throw ParseError(path + ": flag value must be 0 or 1", reader.line_no());
      if (value == "1") args.push_back("--" + key.substr(5));
    } else if (key != "tool_version" && key != "duration_seconds") {
      throw ParseError(path + ": unknown key '" + key + "'", reader.line_no());
    }
  }
  if (subcommand.empty() || subcommand == "replay") throw Error(path + ": manifest has no replayable subcommand");
  args.insert(args.begin(), subcommand);
  return args;
}

}  // namespace detail

// Runs one invocation. `args` excludes the program name. Returns the exit code.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Long-tail normalization toolkit", "longtail"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));
  std::map<std::string, std::unique_ptr<detail::Command>> cmds;
  detail::add_count(app, cmds);
  detail::add_norm_table(app, cmds);
  detail::add_norm_stats(app, cmds);
  detail::add_train(app, cmds);
  detail::add_generate(app, cmds);
  detail::add_eval(app, cmds);
  detail::add_synth(app, cmds);
  std::string manifest;
  auto* replay = app.add_subcommand("replay", "Rerun the invocation recorded in a manifest");
  replay->add_option("--manifest", manifest, "A .manifest.tsv file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (replay->parsed()) return run_cli(detail::manifest_args(manifest), out, err);
    for (auto& [name, cmd] : cmds) {
      if (!cmd->app->parsed()) continue;
      const auto start = std::chrono::steady_clock::now();
      cmd->run(out);
      const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
      if (!cmd->out.empty()) detail::write_manifest(name, *cmd, took.count());
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace longtail::cli

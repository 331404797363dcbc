// Command-line entry points. Exit codes: 0 success, 1 usage error, 2 runtime error.
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "csi/inference/latent.hpp"
#include "csi/numerics/errors.hpp"
#include "csi/service/service.hpp"
#include "csi/textproc/corpus.hpp"
#include "csi/training/trainer.hpp"

namespace fs = std::filesystem;
using namespace csi;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw std::runtime_error("no such file: " + path.string());
}

std::string read_text(const fs::path& path) {
  require_file(path);
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<CorpusExample> load_corpus(const fs::path& path) {
  require_file(path);
  return read_corpus(path);
}

Engines load_engines(const fs::path& dir) {
  require_file(dir / "forward.ckpt");
  require_file(dir / "backward.ckpt");
  Engines e;
  e.forward = std::make_shared<const ForwardModel>(ForwardModel::load(dir / "forward.ckpt"));
  e.backward = std::make_shared<const BackwardModel>(BackwardModel::load(dir / "backward.ckpt"));
  return e;
}

std::set<std::size_t> parse_selection(const std::string& spec, std::size_t sentence_count) {
  std::set<std::size_t> out;
  if (spec == "all") {
    for (std::size_t s = 0; s < sentence_count; ++s) out.insert(s);
    return out;
  }
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &used);
    } catch (const std::exception&) {
      throw UsageError("--select: not a sentence index: '" + item + "'");
    }
    if (used != item.size()) throw UsageError("--select: not a sentence index: '" + item + "'");
    if (v >= sentence_count) {
      throw UsageError("--select: sentence " + item + " out of range (document has " +
                       std::to_string(sentence_count) + " sentences)");
    }
    out.insert(v);
  }
  return out;
}

void log_epoch(const char* which, const EpochMetrics& m) { std::cerr << which << " " << m.to_json().dump() << "\n"; }

HttpFrontend* g_frontend = nullptr;

void on_signal(int) {
  if (g_frontend) g_frontend->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative semantic inference for summarization"};
  app.require_subcommand(1);

  struct {
    fs::path out;
    std::size_t n = 2000, sentences = 4;
    std::uint64_t seed = 0;
  } gen;
  auto* gen_cmd = app.add_subcommand("gen-corpus", "Write a synthetic corpus as JSON Lines");
  gen_cmd->add_option("--out", gen.out, "Output file")->required();
  gen_cmd->add_option("--n", gen.n, "Number of examples")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--sentences", gen.sentences, "Sentences per document")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "Base seed");

  struct {
    fs::path corpus, out_dir;
    std::size_t epochs = 20, hidden = 32, batch = 8;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    bool backward = false;
  } train;
  auto* train_cmd = app.add_subcommand("train", "Train the forward model, or the backward model with --backward");
  train_cmd->add_option("--corpus", train.corpus, "Corpus file")->required();
  train_cmd->add_option("--out-dir", train.out_dir, "Checkpoint directory")->required();
  train_cmd->add_option("--epochs", train.epochs, "Epochs")->check(CLI::PositiveNumber);
  train_cmd->add_option("--hidden-dim", train.hidden, "Hidden and embedding size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", train.seed, "Initialisation and shuffle seed");
  train_cmd->add_option("--lr", train.lr, "Adam learning rate")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--batch-size", train.batch, "Mini-batch size")->check(CLI::PositiveNumber);
  train_cmd->add_flag("--backward", train.backward, "Train the backward model");

  struct {
    fs::path corpus, model;
  } eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate on the held-out split of a corpus");
  eval_cmd->add_option("--corpus", eval.corpus, "Corpus file")->required();
  eval_cmd->add_option("--model", eval.model, "Checkpoint directory")->required();

  struct {
    fs::path model;
    int port = 8080;
    std::string host = "127.0.0.1";
    std::optional<fs::path> persist;
  } serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--model", serve.model, "Checkpoint directory")->required();
  serve_cmd->add_option("--port", serve.port, "Port")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--host", serve.host, "Bind address");
  serve_cmd->add_option("--persist", serve.persist, "Write session JSON here on every mutation");

  struct {
    fs::path model, input;
    std::string select = "all", mode = "init_with";
    std::size_t n = 3;
  } summ;
  auto* summ_cmd = app.add_subcommand("summarize", "Summarize a document and print the session JSON");
  summ_cmd->add_option("--model", summ.model, "Checkpoint directory")->required();
  summ_cmd->add_option("--input", summ.input, "Document text file")->required();
  summ_cmd->add_option("--select", summ.select, "Selected sentences: comma-separated indices or 'all'");
  summ_cmd->add_option("--mode", summ.mode, "init_with or add")->check(CLI::IsMember({"init_with", "add"}));
  summ_cmd->add_option("--n", summ.n, "Sentences to generate")->check(CLI::PositiveNumber);

  struct {
    fs::path model, input, summary;
    double threshold = 0.5;
  } attr;
  auto* attr_cmd = app.add_subcommand("attribute", "Print the coverage of a summary over a document");
  attr_cmd->add_option("--model", attr.model, "Checkpoint directory")->required();
  attr_cmd->add_option("--input", attr.input, "Document text file")->required();
  attr_cmd->add_option("--summary", attr.summary, "Summary text file")->required();
  attr_cmd->add_option("--threshold", attr.threshold, "Coverage threshold")->check(CLI::Range(0.0, 1.0));

  auto* lever_cmd = app.add_subcommand("lever-demo", "Forward and backward inference on the lever model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    std::cerr << app.help();
    return 1;
  }

  try {
    if (*gen_cmd) {
      write_corpus(gen.out, generate_synthetic_corpus(gen.seed, gen.n, gen.sentences));
      std::cerr << "wrote " << gen.n << " examples to " << gen.out.string() << "\n";
    } else if (*train_cmd) {
      const auto corpus = load_corpus(train.corpus);
      TrainConfig tc;
      tc.epochs = train.epochs;
      tc.seed = train.seed;
      tc.learning_rate = train.lr;
      tc.batch_size = train.batch;
      json curve = json::array();
      fs::create_directories(train.out_dir);
      fs::path written;
      if (train.backward) {
        BackwardConfig bc;
        bc.embed_dim = bc.hidden_dim = train.hidden;
        const BackwardModel m = fit_backward(corpus, bc, tc, [&](const EpochMetrics& e) {
          log_epoch("backward", e);
          curve.push_back(e.to_json());
        });
        written = train.out_dir / "backward.ckpt";
        m.save(written);
      } else {
        ModelConfig mc;
        mc.embed_dim = mc.hidden_dim = train.hidden;
        const ForwardModel m = fit_forward(corpus, mc, tc, [&](const EpochMetrics& e) {
          log_epoch("forward", e);
          curve.push_back(e.to_json());
        });
        written = train.out_dir / "forward.ckpt";
        m.save(written);
      }
      std::cout << json{{"model", train.backward ? "backward" : "forward"},
                        {"checkpoint", written.string()},
                        {"train", tc.to_json()},
                        {"curve", curve}}
                       .dump(2)
                << "\n";
    } else if (*eval_cmd) {
      const auto corpus = load_corpus(eval.corpus);
      const Engines e = load_engines(eval.model);
      const CorpusSplit split = split_corpus(corpus);
      std::cout << evaluate(*e.forward, *e.backward, split.held_out).to_json().dump(2) << "\n";
    } else if (*serve_cmd) {
      ServiceOptions options;
      options.persist_dir = serve.persist;
      Engines e = load_engines(serve.model);
      const std::string version = fnv1a_hex(e.forward->serialize() + e.backward->serialize());
      Service service(std::move(e), version, options);
      HttpFrontend http(service);
      const int port = http.bind(serve.host, serve.port);
      g_frontend = &http;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "serving model " << version << " on http://" << serve.host << ":" << port << "\n";
      http.listen();
    } else if (*summ_cmd) {
      const std::string text = read_text(summ.input);
      Session session("cli", make_document(text), load_engines(summ.model));
      session.set_selection(parse_selection(summ.select, session.document().sentence_count()));
      ForwardRequest r;
      if (summ.mode == "init_with") {
        r.n_sentences = summ.n;
        session.run_forward(r);
      } else {
        r.mode = GenerationMode::AddSentence;
        for (std::size_t k = 0; k < summ.n; ++k) session.run_forward(r);
      }
      std::cout << session.to_json().dump(2) << "\n";
    } else if (*attr_cmd) {
      const Document doc = make_document(read_text(attr.input));
      const auto summary = tokenize(read_text(attr.summary));
      const Engines e = load_engines(attr.model);
      if (doc.tokens.empty()) throw UsageError("--input: document is empty");
      std::cout << coverage_to_json(e.backward->attribute(doc, summary, attr.threshold)).dump(2) << "\n";
    } else if (*lever_cmd) {
      std::cout << lever_demo();
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

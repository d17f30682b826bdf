#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "contfood/checkpoint.hpp"
#include "contfood/cli.hpp"
#include "contfood/codec.hpp"
#include "contfood/corpus.hpp"
#include "contfood/nnet.hpp"
#include "support.hpp"

using namespace contfood;
using nlohmann::json;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run contfood_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "contfood");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

const std::string kToy = std::string(CONTFOOD_DATA_DIR) + "/toy/two_term.csv";
const std::string kConfig = std::string(CONTFOOD_DATA_DIR) + "/configs/default.json";

json read_json(const std::string& path) { return json::parse(codec::read_file(path)); }

}  // namespace

TEST_CASE("usage errors exit 1, help exits 0") {
  CHECK(contfood_cli({}).code == cli::kUsage);
  CHECK(contfood_cli({"frobnicate"}).code == cli::kUsage);
  CHECK(contfood_cli({"gen", "--bogus"}).code == cli::kUsage);
  CHECK(contfood_cli({"split", "--ratio", "abc"}).code == cli::kUsage);
  const auto help = contfood_cli({"--help"});
  CHECK(help.code == cli::kOk);
  for (const char* sub : {"gen", "ingest", "autolabel", "dedupe", "split", "train", "eval", "compare", "increment",
                          "detect", "serve", "report"}) {
    CHECK_MESSAGE(help.out.find(sub) != std::string::npos, sub);
  }
}

TEST_CASE("train --help lists the default hyperparameters") {
  const auto h = contfood_cli({"train", "--help"});
  CHECK(h.code == cli::kOk);
  for (const char* s : {"--batch-size UINT [32]", "--epochs UINT [100]", "--lr FLOAT [0.001]", "--l2 FLOAT [0.01]",
                        "--patience UINT [5]", "--hidden TEXT [64,32]", "--max-features UINT [5000]"}) {
    CHECK_MESSAGE(h.out.find(s) != std::string::npos, s);
  }
}

TEST_CASE("missing inputs exit 2") {
  testing::TempDir dir("cli-missing");
  CHECK(contfood_cli({"ingest", "--in", dir.file("nope.csv"), "--out", dir.file("x.csv")}).code == cli::kData);
  CHECK(contfood_cli({"eval", "--pred", dir.file("a.csv"), "--truth", dir.file("b.csv"), "--out", dir.file("m.json")}).code ==
        cli::kData);
}

TEST_CASE("gen, autolabel, split and dedupe") {
  testing::TempDir dir("cli-gen");
  CHECK(contfood_cli({"gen", "--n", "200", "--seed", "3", "--unlabeled", "--out", dir.file("raw.csv")}).code == cli::kOk);
  CHECK(read_json(dir.file("raw.csv.manifest.json")).at("command") == "gen");
  const auto raw = ingest(dir.file("raw.csv"));
  CHECK(raw.size() == 200);
  CHECK(std::none_of(raw.records.begin(), raw.records.end(), [](const auto& r) { return r.label.has_value(); }));
  CHECK(contfood_cli({"autolabel", "--in", dir.file("raw.csv"), "--out", dir.file("labeled.csv")}).code == cli::kOk);
  const auto labeled = ingest(dir.file("labeled.csv"));
  CHECK(std::all_of(labeled.records.begin(), labeled.records.end(), [](const auto& r) { return r.label.has_value(); }));
  CHECK(contfood_cli({"split", "--in", dir.file("labeled.csv"), "--ratio", "0.8", "--seed", "3", "--train-out",
             dir.file("train.csv"), "--test-out", dir.file("test.csv")})
            .code == cli::kOk);
  CHECK(ingest(dir.file("train.csv")).size() == 160);
  CHECK(ingest(dir.file("test.csv")).size() == 40);
  CHECK(contfood_cli({"dedupe", "--in", dir.file("labeled.csv"), "--out", dir.file("dedup.csv")}).code == cli::kOk);
  CHECK(ingest(dir.file("dedup.csv")).size() <= 200);

  // Same seed, same bytes.
  CHECK(contfood_cli({"gen", "--n", "200", "--seed", "3", "--unlabeled", "--out", dir.file("again.csv")}).code == cli::kOk);
  CHECK(codec::read_file(dir.file("again.csv")) == codec::read_file(dir.file("raw.csv")));
  CHECK(contfood_cli({"split", "--in", dir.file("labeled.csv"), "--ratio", "1.5"}).code == cli::kUsage);
}

TEST_CASE("train on the toy corpus, then eval, increment, detect and report") {
  testing::TempDir dir("cli-train");
  const auto model = dir.file("model");
  const auto t = contfood_cli({"train", "--data", kToy, "--config", kConfig, "--seed", "1", "--out-dir", model});
  REQUIRE_MESSAGE(t.code == cli::kOk, t.err);
  const auto ckpt = Checkpoint::read(model + "/model.ckpt.json");
  CHECK(ckpt.params.dims() == std::vector<std::size_t>{ckpt.vectorizer.dim(), 64, 32, 1});
  const auto history = history_from_csv(codec::read_file(model + "/history.csv"));
  REQUIRE_FALSE(history.empty());
  CHECK(history.back().train_accuracy == 1.0);
  const auto manifest = read_json(model + "/manifest.json");
  CHECK(manifest.at("command") == "train");
  CHECK(manifest.at("outputs").size() >= 3);
  CHECK(manifest.at("outputs")[0].at("sha256").get<std::string>().size() == 64);

  // eval with a checkpoint, and on identical prediction / truth files.
  CHECK(contfood_cli({"eval", "--checkpoint", model + "/model.ckpt.json", "--data", kToy, "--out", dir.file("m.json")}).code ==
        cli::kOk);
  CHECK(read_json(dir.file("m.json")).at("accuracy") == 1.0);
  CHECK(contfood_cli({"eval", "--pred", kToy, "--truth", kToy, "--out", dir.file("same.json")}).code == cli::kOk);
  const auto same = read_json(dir.file("same.json"));
  CHECK(same.at("accuracy") == 1.0);
  CHECK(same.at("mae") == 0.0);
  CHECK(same.at("confusion").at("fp") == 0);

  // increment with a JSONL batch.
  codec::write_file_atomic(dir.file("batch.jsonl"),
                           "{\"item_name\":\"Tofu Noodles Deluxe\",\"type\":\"veg\"}\n"
                           "{\"item_name\":\"Chicken Rice Deluxe\",\"type\":\"nonveg\"}\n");
  const auto inc = contfood_cli({"increment", "--checkpoint", model + "/model.ckpt.json", "--batch", dir.file("batch.jsonl"),
                        "--strategy", "replay", "--epochs", "2", "--out-dir", dir.file("inc"), "--full-retrain-data",
                        kToy});
  REQUIRE_MESSAGE(inc.code == cli::kOk, inc.err);
  const auto report = read_json(dir.file("inc/report.json"));
  CHECK(report.at("new_items_count") == 2);
  CHECK(report.at("replayed_count") == 2);
  CHECK(report.at("strategy") == "replay");
  CHECK(report.at("accuracy_drop").get<double>() ==
        report.at("old_test_accuracy_before").get<double>() - report.at("old_test_accuracy_after").get<double>());
  CHECK(report.contains("full_retrain"));
  CHECK(Checkpoint::read(dir.file("inc/model.ckpt.json")).increments_applied == 1);
  CHECK(contfood_cli({"increment", "--checkpoint", model + "/model.ckpt.json", "--batch", dir.file("batch.jsonl"),
             "--strategy", "ewc"})
            .code == cli::kUsage);

  // detect.
  codec::write_file_atomic(dir.file("names.txt"), "Tofu Bowl\nZyzzyva Flan\n");
  CHECK(contfood_cli({"detect", "--checkpoint", model + "/model.ckpt.json", "--in", dir.file("names.txt"), "--out",
             dir.file("verdicts.jsonl")})
            .code == cli::kOk);
  const auto verdicts = codec::read_file(dir.file("verdicts.jsonl"));
  const auto second = json::parse(verdicts.substr(verdicts.find('\n') + 1));
  CHECK(second.at("item_name") == "Zyzzyva Flan");
  CHECK(second.at("flagged") == true);
  CHECK(second.at("reason") == "all_oov");

  // report renders key: value lines.
  const auto r = contfood_cli({"report", dir.file("inc/report.json"), dir.file("same.json")});
  CHECK(r.code == cli::kOk);
  CHECK(r.out.find("strategy: replay") != std::string::npos);
  CHECK(r.out.find("confusion.tp: ") != std::string::npos);
  CHECK(r.out.find("accuracy: 1") != std::string::npos);
}

TEST_CASE("a diverging run exits 3") {
  testing::TempDir dir("cli-numeric");
  const auto t = contfood_cli({"train", "--data", kToy, "--lr", "1e300", "--epochs", "5", "--out-dir", dir.file("m")});
  CHECK(t.code == cli::kNumeric);
}

TEST_CASE("render_key_values flattens nested documents") {
  const json j{{"a", {{"b", 1}, {"c", json::array({"x", true})}}}, {"d", nullptr}, {"e", 0.5}};
  CHECK(cli::render_key_values(j) == "a.b: 1\na.c.0: x\na.c.1: true\nd: null\ne: 0.5\n");
}

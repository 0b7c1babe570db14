#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <string>

#include "test_util.hpp"

using debias::test::data_file;
using debias::test::slurp;
using debias::test::spit;
using debias::test::TempDir;

namespace {

int run(const std::string& args, const std::string& out_file = "/dev/null") {
  const std::string cmd = std::string(DEBIAS_TAGGER) + " " + args + " >" + out_file + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const std::string& s) { return "'" + s + "'"; }

std::string fig1_args() {
  return "--src " + q(data_file("fig1.src")) + " --tgt " + q(data_file("fig1.tgt")) + " --tagset-src " +
         q(data_file("universal.tags"));
}

std::string train_args(const TempDir& dir, const std::string& model, const std::string& extra = "") {
  return "train --gold-train " + q(data_file("toy.train")) + " --dev " + q(data_file("toy.dev")) + " --tagset-gold " +
         q(data_file("universal.tags")) + " --config " + q(data_file("toy.cfg")) + " --seed 3 --model-out " +
         q(dir.file(model)) + " --report-out " + q(dir.file(model + ".report")) + " " + extra;
}

}  // namespace

TEST(Cli, ProjectFigureOneBundle) {
  TempDir dir;
  EXPECT_EQ(run("project " + fig1_args() + " --align " + q(data_file("fig1.align")) + " --out " + q(dir.file("p.txt"))), 0);
  EXPECT_EQ(slurp(dir.file("p.txt")), slurp(data_file("fig1.expected")));
}

TEST(Cli, ProjectUsageErrors) {
  TempDir dir;
  EXPECT_EQ(run("project " + fig1_args() + " --out " + q(dir.file("p.txt"))), 2);
  EXPECT_EQ(run("project " + fig1_args() + " --align " + q(data_file("fig1.align")) + " --top-n 1 --out " +
                q(dir.file("p.txt"))),
            2);
  EXPECT_EQ(run("no-such-command"), 2);
}

TEST(Cli, ProjectTopNWithScores) {
  TempDir dir;
  spit(dir.file("s2"), slurp(data_file("fig1.src")) + "Go\tVERB\n.\t.\n\n");
  spit(dir.file("t2"), slurp(data_file("fig1.tgt")) + "Mandehana .\n");
  spit(dir.file("a2"), slurp(data_file("fig1.align")) + "0-0 1-1\n");
  spit(dir.file("sc"), "0.2\n0.9\n");
  EXPECT_EQ(run("project --src " + q(dir.file("s2")) + " --tgt " + q(dir.file("t2")) + " --align " + q(dir.file("a2")) +
                " --scores " + q(dir.file("sc")) + " --top-n 1 --tagset-src " + q(data_file("universal.tags")) +
                " --out " + q(dir.file("p.txt"))),
            0);
  EXPECT_EQ(slurp(dir.file("p.txt")), "Mandehana\tVERB\n.\t.\n\n");
}

TEST(Cli, ProjectMissingFileIsDataError) {
  TempDir dir;
  EXPECT_EQ(run("project " + fig1_args() + " --align " + q(dir.file("missing")) + " --out " + q(dir.file("p.txt"))), 3);
}

TEST(Cli, TrainTagEvalExport) {
  TempDir dir;
  ASSERT_EQ(run(train_args(dir, "m.bin")), 0);
  EXPECT_NE(slurp(dir.file("m.bin.report")).find("# effective config"), std::string::npos);

  EXPECT_EQ(run("tag --model " + q(dir.file("m.bin")) + " --input " + q(data_file("toy.raw")) + " --out " +
                q(dir.file("tagged"))),
            0);
  const std::string tagged = slurp(dir.file("tagged"));
  EXPECT_EQ(tagged.substr(0, 4), "the\t");

  EXPECT_EQ(run("eval --gold " + q(data_file("toy.dev")) + " --model " + q(dir.file("m.bin")) + " --csv-out " +
                q(dir.file("e.csv")),
                dir.file("eval.txt")),
            0);
  EXPECT_NE(slurp(dir.file("eval.txt")).find("accuracy"), std::string::npos);
  EXPECT_NE(slurp(dir.file("e.csv")).find("metric,value"), std::string::npos);

  EXPECT_EQ(run("export-bias --model " + q(dir.file("m.bin")) + " --out " + q(dir.file("a.csv"))), 0);
  EXPECT_EQ(slurp(dir.file("a.csv")).rfind("gold\\projected,NOUN,VERB", 0), 0u);
}

TEST(Cli, TrainTwiceGivesIdenticalModels) {
  TempDir dir;
  ASSERT_EQ(run(train_args(dir, "a.bin")), 0);
  ASSERT_EQ(run(train_args(dir, "b.bin")), 0);
  EXPECT_EQ(slurp(dir.file("a.bin")), slurp(dir.file("b.bin")));
}

TEST(Cli, TrainWithProjectedData) {
  TempDir dir;
  ASSERT_EQ(run("project " + fig1_args() + " --align " + q(data_file("fig1.align")) + " --out " + q(dir.file("p.txt"))), 0);
  EXPECT_EQ(run(train_args(dir, "m.bin", "--projected " + q(dir.file("p.txt")))), 0);
  EXPECT_NE(slurp(dir.file("m.bin.report")).find("joint"), std::string::npos);
}

TEST(Cli, TrainConfigErrors) {
  TempDir dir;
  spit(dir.file("bad.cfg"), "learning_rate = 1\n");
  EXPECT_EQ(run(train_args(dir, "m.bin") + " --config " + q(dir.file("bad.cfg"))), 2);
  EXPECT_EQ(run(train_args(dir, "m.bin") + " --set d_h=oops"), 2);
  EXPECT_EQ(run("train --dev " + q(data_file("toy.dev"))), 2);
}

TEST(Cli, TrainWithMapping) {
  TempDir dir;
  spit(dir.file("fine.train"), "the\tDT\ndog\tNN\nruns\tVB\n.\tPUNCT\n\n");
  EXPECT_EQ(run("train --gold-train " + q(dir.file("fine.train")) + " --dev " + q(dir.file("fine.train")) +
                " --tagset-gold " + q(data_file("universal.tags")) + " --mapping " + q(data_file("toy.mapping")) +
                " --set d_e=4 --set d_h=4 --set stage1_epochs=1 --model-out " + q(dir.file("m")) + " --report-out " +
                q(dir.file("r"))),
            0);
}

TEST(Cli, EvalIdenticalFilesPrintsPerfectAccuracy) {
  TempDir dir;
  EXPECT_EQ(run("eval --gold " + q(data_file("toy.dev")) + " --pred " + q(data_file("toy.dev")) + " --tagset " +
                q(data_file("universal.tags")),
                dir.file("out")),
            0);
  EXPECT_NE(slurp(dir.file("out")).find("accuracy  1.0000"), std::string::npos);
  EXPECT_EQ(run("eval --gold " + q(data_file("toy.dev")) + " --pred " + q(data_file("toy.train")) + " --tagset " +
                q(data_file("universal.tags"))),
            3);
}

TEST(Cli, TagEmptyInputIsDataError) {
  TempDir dir;
  ASSERT_EQ(run(train_args(dir, "m.bin")), 0);
  spit(dir.file("empty"), "");
  EXPECT_EQ(run("tag --model " + q(dir.file("m.bin")) + " --input " + q(dir.file("empty"))), 3);
  spit(dir.file("junk.bin"), "not a model");
  EXPECT_EQ(run("tag --model " + q(dir.file("junk.bin")) + " --input " + q(data_file("toy.raw"))), 3);
}

TEST(Cli, SplitProducesThreeFiles) {
  TempDir dir;
  EXPECT_EQ(run("split --gold " + q(data_file("toy.train")) + " --tagset " + q(data_file("universal.tags")) +
                " --tokens 40 --train-out " + q(dir.file("tr")) + " --dev-out " + q(dir.file("dv")) + " --test-out " +
                q(dir.file("te"))),
            0);
  EXPECT_EQ(slurp(dir.file("tr")) + slurp(dir.file("dv")) + slurp(dir.file("te")), slurp(data_file("toy.train")));
}

TEST(Cli, GradcheckPasses) {
  EXPECT_EQ(run("gradcheck --seeds 2"), 0);
}

TEST(Cli, SynthWritesReports) {
  TempDir dir;
  spit(dir.file("x.cfg"),
       "V = 100\ngold_train_tokens = 200\neval_tokens = 400\nprojected_tokens = 800\nmin_eligible_count = 5\n"
       "train.d_e = 4\ntrain.d_h = 4\ntrain.stage1_epochs = 1\ntrain.stage2_epochs = 1\ntrain.proj_per_gold = 2\n");
  EXPECT_EQ(run("synth --config " + q(dir.file("x.cfg")) + " --seed 4 --out-prefix " + q(dir.file("rep")),
                dir.file("stdout")),
            0);
  EXPECT_NE(slurp(dir.file("rep.txt")).find("seed = 4"), std::string::npos);
  EXPECT_NE(slurp(dir.file("rep.csv")).find("model,test_accuracy"), std::string::npos);
  EXPECT_NE(slurp(dir.file("stdout")).find("debias"), std::string::npos);
  spit(dir.file("bad.cfg"), "K = nope\n");
  EXPECT_EQ(run("synth --config " + q(dir.file("bad.cfg")) + " --out-prefix " + q(dir.file("rep"))), 2);
}

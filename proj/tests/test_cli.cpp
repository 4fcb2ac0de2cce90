#include <nlohmann/json.hpp>

#include <cstdlib>
#include <sys/wait.h>

#include "scenediff/change_detection.hpp"
#include "scenediff/feature_store.hpp"
#include "scenediff/io.hpp"
#include "support.hpp"

using namespace scenediff;
using testing::TempDir;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(const std::string& args, const TempDir& scratch) {
  const std::string out = (scratch / "stdout.txt").string();
  const std::string err = (scratch / "stderr.txt").string();
  const std::string cmd = std::string("\"") + SCENEDIFF_CLI + "\" " + args + " >\"" + out + "\" 2>\"" + err + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = testing::slurp(out);
  r.err = testing::slurp(err);
  return r;
}

constexpr char kWorld[] = " --route_length 60 --descriptor_dim 16 --seed 3";

/// gen, learn-vocab, learn-motion, index and detect into `dir`.
void pipeline(const TempDir& dir, const std::string& detect_flags = "") {
  const std::string d = dir.path().string();
  const std::string common = " --map " + d + "/world/map --models " + d + "/models";
  REQUIRE(run(std::string("gen") + kWorld + " -o " + d + "/world", dir).code == 0);
  Run r = run("learn-vocab" + common + " --word_count 64 --vocab_stride 5 --kmeans_iterations 30", dir);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  r = run("learn-motion" + common + " --tracks " + d +
              "/world/tracks.csv --motion_sample 1500 --motion_iterations 10 --motion_words 200",
          dir);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  REQUIRE(run("index" + common, dir).code == 0);
  r = run("detect" + common + " --query " + d + "/world/queries -o " + d + "/out " + detect_flags, dir);
  REQUIRE_MESSAGE(r.code == 0, r.err);
}

}  // namespace

TEST_CASE("usage errors exit with status 2") {
  TempDir dir;
  Run r = run("frobnicate", dir);
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error: kind=usage", 0) == 0);
  CHECK(run("", dir).code == 2);
  CHECK(run("detect --R notanumber --map x", dir).code == 2);
  r = run("detect --R 0 --map x", dir);
  CHECK(r.code == 2);
  CHECK(r.err.find("kind=configuration") != std::string::npos);
}

TEST_CASE("evaluate on an empty score file fails with a validation error") {
  TempDir dir;
  io::write_text(dir / "changes.csv", "");
  io::write_text(dir / "gt.csv", "query_frame,x0,y0,x1,y1\n");
  Run r = run("evaluate --scores " + (dir / "changes.csv").string() + " --gt " + (dir / "gt.csv").string() +
                  " -o " + (dir / "out").string(),
              dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("kind=validation") != std::string::npos);

  io::write_text(dir / "changes.csv", std::string(kChangesHeader) + "\n");
  r = run("evaluate --scores " + (dir / "changes.csv").string() + " --gt " + (dir / "gt.csv").string(), dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("kind=validation") != std::string::npos);

  r = run("evaluate --scores " + (dir / "missing.csv").string() + " --gt " + (dir / "gt.csv").string(), dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("kind=io") != std::string::npos);
}

TEST_CASE("pipeline runs end to end and reproduces its report") {
  TempDir a, b;
  pipeline(a);
  pipeline(b);
  for (const char* name : {"world/map/frames/10.vsf", "world/tracks.csv", "models/vocab.vvf", "models/motion.mvf",
                           "models/index.bif", "out/changes.csv", "out/localization.csv"}) {
    CHECK_MESSAGE(testing::slurp(a / name) == testing::slurp(b / name), name);
  }
  for (const TempDir* dir : {&a, &b}) {
    const std::string d = dir->path().string();
    const Run r = run("evaluate --scores " + d + "/out/changes.csv --gt " + d + "/world/gt_boxes.csv -o " + d + "/out",
                      *dir);
    REQUIRE_MESSAGE(r.code == 0, r.err);
  }
  const std::string report = testing::slurp(a / "out/report.csv");
  CHECK(report == testing::slurp(b / "out/report.csv"));
  CHECK(report.find("summary,boxes=1,covered=1") != std::string::npos);

  const auto meta = nlohmann::json::parse(testing::slurp(a / "out/run_meta.json"));
  CHECK(meta["subcommand"] == "evaluate");
  CHECK(meta["config"]["R"] == "10");
  CHECK(meta["config"]["K"] == "10");
  CHECK(meta["config"]["Tm"] == "10");
  CHECK(nlohmann::json::parse(testing::slurp(a / "models/run_meta.json"))["subcommand"] == "index");
  CHECK(nlohmann::json::parse(testing::slurp(a / "world/run_meta.json"))["config"]["seed"] == "3");

  const std::string d = a.path().string();
  const Run plot = run("plot-data --scores " + d + "/out/changes.csv --gt " + d + "/world/gt_boxes.csv --map " + d +
                           "/world/map --query " + d + "/world/queries --localization " + d +
                           "/out/localization.csv -o " + d + "/plot",
                       a);
  REQUIRE_MESSAGE(plot.code == 0, plot.err);
  CHECK(testing::slurp(a / "plot/plot.csv").rfind("query_frame,box,best_rank,localization_error\n", 0) == 0);
}

TEST_CASE("detect without motion equals appearance-only scoring") {
  TempDir dir;
  pipeline(dir, "--no-motion");
  const ViewSequenceMap map = read_feature_store(dir / "world/map");
  const ViewSequenceMap queries = read_feature_store(dir / "world/queries");
  const std::vector<ChangeScore> scores = read_change_scores(dir / "out/changes.csv");
  std::vector<FrameId> refs;
  for (const auto& row : io::read_csv(dir / "out/localization.csv", "query_frame,rank,frame_id,distance")) {
    refs.push_back(static_cast<FrameId>(io::parse_int(row[2])));
  }
  REQUIRE(refs.size() == 10);
  const ProjectionDictionary dict(42, 128, 16);
  const ReferencePool pool = build_reference_pool(map, refs, &dict);
  const Frame& q = queries.frames.front();
  REQUIRE(scores.size() == q.features.size());
  for (const ChangeScore& s : scores) {
    CHECK(s.likelihood == likelihood_eq1(binarize(q.features[s.feature_id].dense(), dict), pool));
    CHECK_FALSE(s.anomaly_motion);
  }
  CHECK(nlohmann::json::parse(testing::slurp(dir / "out/run_meta.json"))["config"]["motion"] == "false");
}

TEST_CASE("configuration file and flag overrides") {
  TempDir dir;
  io::write_text(dir / "run.toml", "[world]\nroute_length = 40\ndescriptor_dim = 8\nseed = 5\n");
  const std::string d = dir.path().string();
  Run r = run("gen --config " + d + "/run.toml --route_length 50 -o " + d + "/w", dir);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const ViewSequenceMap map = read_feature_store(dir / "w/map");
  CHECK(map.frames.size() == 50);
  CHECK(map.layout.dimension == 8);
  r = run("gen --config " + d + "/nope.toml", dir);
  CHECK(r.code == 2);
}

#include <doctest.h>

#include <filesystem>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mtrl/cli.hpp"

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = mtrl::cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

std::string path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("mtrl_cli_" + name)).string();
}

// Off-diagonal entry of the printed correlation matrix.
double printed_entry(const std::string& out, const std::string& row, int col) {
  std::istringstream in(out.substr(out.find("correlation")));
  std::string line;
  std::getline(in, line);  // title
  std::getline(in, line);  // column names
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string name;
    ls >> name;
    if (name == row) {
      std::string v;
      for (int c = 0; c <= col; ++c) ls >> v;
      return std::stod(v);
    }
  }
  return 0.0;
}

}  // namespace

TEST_CASE("toy workflow") {
  const std::string data = path("toy.csv"), model = path("toy.json");
  REQUIRE(run({"make-toy", "--seed", "7", "-o", data}).code == 0);
  const Run train = run({"train", "--data", data, "--l1", "0.01", "--l2", "0.005", "--kernel", "linear", "-o", model});
  REQUIRE(train.code == 0);
  CHECK(train.out.find("correlation") != std::string::npos);
  CHECK(printed_entry(train.out, "t1", 1) <= -0.95);

  const Run a = run({"eval", "--model", model, "--data", data});
  const Run b = run({"eval", "--model", model, "--data", data});
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.find("explained variance") != std::string::npos);

  const Run p = run({"predict", "--model", model, "--task", "t1", "--x", "2.0"});
  CHECK(p.code == 0);
  const Run pd = run({"predict", "--model", model, "--data", data});
  CHECK(pd.code == 0);
  CHECK(std::count(pd.out.begin(), pd.out.end(), '\n') == 16);

  std::filesystem::remove(data);
  std::filesystem::remove(model);
}

TEST_CASE("unknown task is a single-line error") {
  const std::string data = path("toy2.csv"), model = path("toy2.json");
  REQUIRE(run({"make-toy", "--seed", "1", "-o", data}).code == 0);
  REQUIRE(run({"train", "--data", data, "-o", model}).code == 0);
  const Run r = run({"predict", "--model", model, "--task", "t9", "--x", "1"});
  CHECK(r.code != 0);
  CHECK(r.out.empty());
  CHECK(r.err.rfind("error: UnknownTask: ", 0) == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  std::filesystem::remove(data);
  std::filesystem::remove(model);
}

TEST_CASE("make-toy is deterministic") {
  CHECK(run({"make-toy", "--seed", "5"}).out == run({"make-toy", "--seed", "5"}).out);
  CHECK(run({"make-toy", "--seed", "5"}).out != run({"make-toy", "--seed", "6"}).out);
}

TEST_CASE("cv, new-task and prior-train") {
  const std::string data = path("toy3.csv"), model = path("toy3.json"), task = path("new.csv"),
                    prior = path("prior.txt");
  REQUIRE(run({"make-toy", "--seed", "2", "-o", data}).code == 0);
  const Run cv = run({"cv", "--data", data, "--l1", "0.01,0.1", "--l2", "0.005", "--folds", "3", "--seed", "4"});
  REQUIRE(cv.code == 0);
  CHECK(cv.out.find("best: lambda1=") != std::string::npos);
  CHECK(cv.out == run({"cv", "--data", data, "--l1", "0.01,0.1", "--l2", "0.005", "--folds", "3", "--seed", "4"}).out);

  REQUIRE(run({"train", "--data", data, "-o", model}).code == 0);
  {
    std::ofstream f(task);
    f << "task,y,x1\nnew,13,1\nnew,16,2\nnew,19,3\nnew,25,5\n";
  }
  for (const char* step : {"exact", "socp"}) {
    const Run nt = run({"new-task", "--model", model, "--data", task, "--omega-step", step});
    REQUIRE(nt.code == 0);
    CHECK(nt.out.find("sigma:") != std::string::npos);
  }
  {
    std::ofstream f(prior);
    f << "kind=network\nedges=0:1\n";
  }
  const Run pt = run({"prior-train", "--data", data, "--prior", prior});
  CHECK(pt.code == 0);
  CHECK(pt.out.find("implied by the prior") != std::string::npos);
  CHECK(std::isnan(printed_entry(pt.out, "t3", 0)));  // isolated task has no implied variance
  for (const auto& p : {data, model, task, prior}) std::filesystem::remove(p);
}

TEST_CASE("usage and input errors") {
  CHECK(run({}).code == 2);
  CHECK(run({"train"}).code == 2);
  CHECK(run({"train", "--data", "x.csv", "--kernel", "poly"}).code == 2);
  const Run missing = run({"train", "--data", "/nonexistent.csv"});
  CHECK(missing.code == 1);
  CHECK(missing.err.rfind("error: IoError: ", 0) == 0);
  CHECK(run({"--help"}).code == 0);
}

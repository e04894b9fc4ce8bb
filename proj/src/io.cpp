#include "mtrl/io.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <sstream>
#include <unordered_map>

#include "mtrl/error.hpp"

namespace mtrl {

namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<double> to_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, fmt::format("cannot open '{}'", path));
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, fmt::format("cannot write '{}'", path));
  return out;
}

}  // namespace

MultiTaskDataset parse_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string_view> header;
  std::string header_line;
  while (std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty()) {
      header_line = line;
      break;
    }
  }
  if (header_line.empty()) throw Error(ErrorCode::EmptyFile, "dataset file is empty");
  header = split(header_line, ',');
  if (header.size() < 3 || header[0] != "task" || header[1] != "y") {
    throw Error(ErrorCode::ParseError,
                fmt::format("line {}: header must be task,y,x1,...,xd", lineno));
  }
  const std::size_t d = header.size() - 2;

  std::vector<TaskData> tasks;
  std::unordered_map<std::string, std::size_t> index;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::DimensionMismatch,
                  fmt::format("line {}: {} fields, header has {}", lineno, cells.size(),
                              header.size()));
    }
    if (cells[0].empty()) throw Error(ErrorCode::ParseError, fmt::format("line {}: empty task id", lineno));
    const auto y = to_double(cells[1]);
    if (!y) {
      throw Error(ErrorCode::ParseError,
                  fmt::format("line {}, column y: '{}' is not a number", lineno, cells[1]));
    }
    VectorXd x(static_cast<Index>(d));
    for (std::size_t c = 0; c < d; ++c) {
      const auto v = to_double(cells[c + 2]);
      if (!v) {
        throw Error(ErrorCode::ParseError, fmt::format("line {}, column {}: '{}' is not a number",
                                                       lineno, header[c + 2], cells[c + 2]));
      }
      x(static_cast<Index>(c)) = *v;
    }
    const std::string id(cells[0]);
    auto [it, fresh] = index.emplace(id, tasks.size());
    if (fresh) tasks.push_back(TaskData{id, {}, {}});
    tasks[it->second].inputs.push_back(std::move(x));
    tasks[it->second].targets.push_back(*y);
  }
  if (tasks.empty()) throw Error(ErrorCode::EmptyFile, "dataset file has a header but no rows");
  return MultiTaskDataset(std::move(tasks));
}

MultiTaskDataset load_csv(const std::string& path) {
  auto in = open_in(path);
  return parse_csv(in);
}

void write_csv(const MultiTaskDataset& ds, std::ostream& out) {
  out << "task,y";
  for (Index c = 0; c < ds.dim(); ++c) out << ",x" << (c + 1);
  out << '\n';
  for (const auto& t : ds.tasks()) {
    for (std::size_t j = 0; j < t.targets.size(); ++j) {
      out << t.id << ',' << fmt::format("{}", t.targets[j]);
      for (Index c = 0; c < t.inputs[j].size(); ++c) out << ',' << fmt::format("{}", t.inputs[j](c));
      out << '\n';
    }
  }
}

void write_csv(const MultiTaskDataset& ds, const std::string& path) {
  auto out = open_out(path);
  write_csv(ds, out);
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

json matrix_json(const MatrixXd& a) {
  json rows = json::array();
  for (Index i = 0; i < a.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const VectorXd& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

MatrixXd matrix_from(const json& j, Index cols) {
  MatrixXd a(static_cast<Index>(j.size()), cols);
  for (Index i = 0; i < a.rows(); ++i) {
    const json& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Index>(row.size()) != cols) throw Error(ErrorCode::CorruptModel, "ragged matrix");
    for (Index c = 0; c < cols; ++c) a(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return a;
}

VectorXd vector_from(const json& j) {
  VectorXd v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

std::string checksum_hex(const json& payload) {
  return fmt::format("{:016x}", fnv1a64(payload.dump()));
}

}  // namespace

std::string serialize_model(const TrainedModel& model) {
  json p;
  p["task_ids"] = model.task_ids;
  p["task_sizes"] = model.task_sizes;
  p["kernel"] = {{"kind", std::string(kernel_name(model.kernel.kind))},
                 {"width", model.kernel.width}};
  const Hyperparams& hp = model.hyperparams;
  p["lambda1"] = hp.lambda1;
  p["lambda2"] = hp.lambda2;
  p["tol"] = hp.tol;
  p["max_iters"] = hp.max_iters;
  p["omega_epsilon"] = hp.omega_epsilon;
  p["dim"] = model.dim();
  p["alpha"] = vector_json(model.alpha);
  p["bias"] = vector_json(model.bias);
  p["omega"] = matrix_json(model.omega.matrix());
  p["support_inputs"] = matrix_json(model.support_inputs);
  p["fixed_inverse"] = model.fixed_inverse ? matrix_json(*model.fixed_inverse) : json(nullptr);
  p["objective_trace"] = model.objective_trace;
  p["iterations"] = model.iterations;
  p["converged"] = model.converged;

  json doc;
  doc["format"] = "mtrl-model";
  doc["version"] = kModelFormatVersion;
  doc["checksum"] = checksum_hex(p);
  doc["payload"] = std::move(p);
  return doc.dump(1) + "\n";
}

TrainedModel deserialize_model(std::string_view text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(ErrorCode::CorruptModel, "model file is not a complete JSON document");
  }
  try {
    if (doc.at("format").get<std::string>() != "mtrl-model") {
      throw Error(ErrorCode::CorruptModel, "not an mtrl model file");
    }
    const int version = doc.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw Error(ErrorCode::VersionMismatch,
                  fmt::format("model format version {}, this build reads {}", version,
                              kModelFormatVersion));
    }
    const json& p = doc.at("payload");
    if (doc.at("checksum").get<std::string>() != checksum_hex(p)) {
      throw Error(ErrorCode::CorruptModel, "model checksum mismatch");
    }

    TrainedModel m;
    m.task_ids = p.at("task_ids").get<std::vector<std::string>>();
    m.task_sizes = p.at("task_sizes").get<std::vector<Index>>();
    const std::string kind = p.at("kernel").at("kind").get<std::string>();
    m.kernel.kind = kind == "rbf" ? KernelKind::Rbf : KernelKind::Linear;
    m.kernel.width = p.at("kernel").at("width").get<double>();
    m.hyperparams.lambda1 = p.at("lambda1").get<double>();
    m.hyperparams.lambda2 = p.at("lambda2").get<double>();
    m.hyperparams.tol = p.at("tol").get<double>();
    m.hyperparams.max_iters = p.at("max_iters").get<int>();
    m.hyperparams.omega_epsilon = p.at("omega_epsilon").get<double>();
    const Index dim = p.at("dim").get<Index>();
    const Index tasks = static_cast<Index>(m.task_ids.size());
    m.alpha = vector_from(p.at("alpha"));
    m.bias = vector_from(p.at("bias"));
    m.omega = TaskCovariance(matrix_from(p.at("omega"), tasks));
    m.support_inputs = matrix_from(p.at("support_inputs"), dim);
    if (!p.at("fixed_inverse").is_null()) m.fixed_inverse = matrix_from(p.at("fixed_inverse"), tasks);
    m.objective_trace = p.at("objective_trace").get<std::vector<double>>();
    m.iterations = p.at("iterations").get<int>();
    m.converged = p.at("converged").get<bool>();

    Index total = 0;
    for (Index n : m.task_sizes) total += n;
    if (static_cast<Index>(m.task_sizes.size()) != tasks || m.bias.size() != tasks ||
        m.alpha.size() != total || m.support_inputs.rows() != total) {
      throw Error(ErrorCode::CorruptModel, "model fields have inconsistent sizes");
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptModel, fmt::format("malformed model file: {}", e.what()));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::VersionMismatch || e.code() == ErrorCode::CorruptModel) throw;
    throw Error(ErrorCode::CorruptModel, fmt::format("invalid model contents: {}", e.what()));
  }
}

void save_model(const TrainedModel& model, const std::string& path) {
  auto out = open_out(path);
  out << serialize_model(model);
  if (!out) throw Error(ErrorCode::IoError, fmt::format("failed writing '{}'", path));
}

TrainedModel load_model(const std::string& path) {
  auto in = open_in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (trim(text).empty()) throw Error(ErrorCode::CorruptModel, fmt::format("'{}' is empty", path));
  return deserialize_model(text);
}

PriorSpec parse_prior_spec(std::istream& in) {
  PriorSpec spec;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = trim(line);
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = trim(s.substr(0, hash));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::ParseError, fmt::format("prior spec line {}: expected key=value", lineno));
    }
    const std::string key(trim(s.substr(0, eq)));
    const std::string value(trim(s.substr(eq + 1)));
    if (key == "kind") {
      spec.kind = value;
    } else {
      spec.params[key] = value;
    }
  }
  if (spec.kind.empty()) throw Error(ErrorCode::ParseError, "prior spec has no kind= line");
  return spec;
}

PriorSpec load_prior_spec(const std::string& path) {
  auto in = open_in(path);
  return parse_prior_spec(in);
}

namespace {

const std::string& require(const PriorSpec& spec, const std::string& key) {
  const auto it = spec.params.find(key);
  if (it == spec.params.end()) {
    throw Error(ErrorCode::ParseError, fmt::format("prior kind '{}' needs '{}='", spec.kind, key));
  }
  return it->second;
}

double number(std::string_view s, std::string_view what) {
  const auto v = to_double(trim(s));
  if (!v) throw Error(ErrorCode::ParseError, fmt::format("{}: '{}' is not a number", what, s));
  return *v;
}

long integer(std::string_view s, std::string_view what) {
  s = trim(s);
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw Error(ErrorCode::ParseError, fmt::format("{}: '{}' is not an integer", what, s));
  }
  return v;
}

}  // namespace

FixedInverseCovariance build_prior(const PriorSpec& spec, Index m) {
  if (spec.kind == "mean") return laplacian_mean_regularization(m);
  if (spec.kind == "similarity") {
    const auto rows = split(require(spec, "matrix"), ';');
    if (static_cast<Index>(rows.size()) != m) {
      throw Error(ErrorCode::DimensionMismatch,
                  fmt::format("similarity has {} rows for {} tasks", rows.size(), m));
    }
    MatrixXd s(m, m);
    for (Index i = 0; i < m; ++i) {
      const auto cells = split(rows[static_cast<std::size_t>(i)], ',');
      if (static_cast<Index>(cells.size()) != m) {
        throw Error(ErrorCode::DimensionMismatch,
                    fmt::format("similarity row {} has {} entries for {} tasks", i, cells.size(), m));
      }
      for (Index j = 0; j < m; ++j) s(i, j) = number(cells[static_cast<std::size_t>(j)], "matrix");
    }
    return laplacian_from_similarity(s);
  }
  if (spec.kind == "network") {
    std::vector<std::pair<Index, Index>> edges;
    const auto it = spec.params.find("edges");
    if (it != spec.params.end() && !trim(it->second).empty()) {
      for (auto e : split(it->second, ',')) {
        const auto ends = split(e, ':');
        if (ends.size() != 2) throw Error(ErrorCode::ParseError, fmt::format("edge '{}' is not p:q", e));
        edges.emplace_back(integer(ends[0], "edges"), integer(ends[1], "edges"));
      }
    }
    return laplacian_from_task_network(m, edges);
  }
  if (spec.kind == "clustered") {
    std::vector<int> clusters;
    for (auto c : split(require(spec, "clusters"), ',')) {
      clusters.push_back(static_cast<int>(integer(c, "clusters")));
    }
    return clustered_inverse_covariance(m, clusters, number(require(spec, "alpha"), "alpha"),
                                        number(require(spec, "beta"), "beta"),
                                        number(require(spec, "gamma"), "gamma"));
  }
  throw Error(ErrorCode::ParseError,
              fmt::format("unknown prior kind '{}' (mean, similarity, network, clustered)", spec.kind));
}

}  // namespace mtrl

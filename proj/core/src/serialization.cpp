#include "roadgen/serialization.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace roadgen {

namespace {

using ordered_json = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

constexpr char kCheckpointMagic[8] = {'R', 'G', 'C', 'K', 'P', 'T', '0', '1'};

void write_file(const std::filesystem::path& path, const std::string& content, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_file(const std::filesystem::path& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw std::runtime_error("read failed: " + path.string());
  return ss.str();
}

ordered_json parse_json(const std::string& text, const std::filesystem::path& origin) {
  ordered_json j = ordered_json::parse(text, nullptr, false);
  if (j.is_discarded()) throw std::runtime_error("malformed JSON in " + origin.string());
  return j;
}

ordered_json genome_to_json(const RoadGenome& genome) {
  ordered_json j;
  j["curvatures"] = genome.curvature;
  j["arc_lengths"] = genome.arc_length;
  return j;
}

RoadGenome genome_from_json(const ordered_json& j, const std::filesystem::path& origin) {
  if (!j.contains("curvatures") || !j.contains("arc_lengths"))
    throw std::runtime_error("missing genome fields in " + origin.string());
  RoadGenome g;
  g.curvature = j.at("curvatures").get<std::vector<double>>();
  g.arc_length = j.at("arc_lengths").get<std::vector<double>>();
  g.check_invariants();
  return g;
}

std::string outcome_to_string(Outcome o) { return o == Outcome::Pass ? "PASS" : "FAIL"; }

Outcome outcome_from_string(const std::string& s, const std::filesystem::path& origin) {
  if (s == "PASS") return Outcome::Pass;
  if (s == "FAIL") return Outcome::Fail;
  throw std::runtime_error("unknown test_outcome '" + s + "' in " + origin.string());
}

ordered_json config_to_json(const DiscriminatorConfig& cfg) {
  ordered_json j;
  j["d_model"] = cfg.d_model;
  j["n_layers"] = cfg.n_layers;
  j["n_heads"] = cfg.n_heads;
  j["block_size"] = cfg.block_size;
  j["dropout"] = cfg.dropout;
  j["learning_rate"] = cfg.learning_rate;
  j["batch_size"] = cfg.batch_size;
  j["epochs"] = cfg.epochs;
  j["pos_weight_cap"] = cfg.pos_weight_cap;
  j["val_fraction"] = cfg.val_fraction;
  j["mirror_augment"] = cfg.mirror_augment;
  return j;
}

DiscriminatorConfig config_from_json(const ordered_json& j) {
  DiscriminatorConfig cfg;
  cfg.d_model = j.at("d_model").get<int>();
  cfg.n_layers = j.at("n_layers").get<int>();
  cfg.n_heads = j.at("n_heads").get<int>();
  cfg.block_size = j.at("block_size").get<int>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.epochs = j.at("epochs").get<int>();
  cfg.pos_weight_cap = j.at("pos_weight_cap").get<double>();
  cfg.val_fraction = j.at("val_fraction").get<double>();
  cfg.mirror_augment = j.value("mirror_augment", true);
  cfg.check();
  return cfg;
}

}  // namespace

void save_test_case(const std::filesystem::path& path, const std::string& id,
                    const RoadGenome& genome, const CartesianRoad& road) {
  ordered_json j;
  j["id"] = id;
  j["curvatures"] = genome.curvature;
  j["arc_lengths"] = genome.arc_length;
  ordered_json pts = ordered_json::array();
  for (const Pose& p : road.poses) pts.push_back(ordered_json::array({p.x, p.y}));
  j["road_points"] = std::move(pts);
  j["lane_width"] = road.lane_width;
  write_file(path, j.dump(2) + "\n", false);
}

TestCaseFile load_test_case(const std::filesystem::path& path) {
  const ordered_json j = parse_json(read_file(path, false), path);
  TestCaseFile tc;
  if (!j.contains("id")) throw std::runtime_error("missing id in " + path.string());
  tc.id = j.at("id").get<std::string>();
  tc.genome = genome_from_json(j, path);
  tc.lane_width = j.value("lane_width", kDefaultLaneWidth);
  return tc;
}

void save_result(const std::filesystem::path& path, const TestResult& result) {
  ordered_json j;
  j["id"] = result.id;
  j["valid"] = result.valid;
  j["test_outcome"] = outcome_to_string(result.outcome);
  j["test_duration"] = result.duration;
  ordered_json events = ordered_json::array();
  for (const auto& ev : result.oob_events) {
    ordered_json e;
    e["arc_position"] = ev.arc_position;
    e["lateral_offset"] = ev.lateral_offset;
    events.push_back(std::move(e));
  }
  j["oob_events"] = std::move(events);
  write_file(path, j.dump(2) + "\n", false);
}

TestResult load_result(const std::filesystem::path& path) {
  const ordered_json j = parse_json(read_file(path, false), path);
  TestResult r;
  r.id = j.at("id").get<std::string>();
  r.valid = j.value("valid", true);
  r.outcome = outcome_from_string(j.at("test_outcome").get<std::string>(), path);
  r.duration = j.at("test_duration").get<double>();
  if (j.contains("oob_events")) {
    for (const auto& e : j.at("oob_events")) {
      OobEvent ev{};
      ev.arc_position = e.at("arc_position").get<double>();
      ev.lateral_offset = e.at("lateral_offset").get<double>();
      r.oob_events.push_back(ev);
    }
  }
  return r;
}

std::vector<TestResult> load_results_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw std::runtime_error("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<TestResult> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(load_result(f));
  return out;
}

void save_dataset(const std::filesystem::path& path, const std::vector<LabeledRoad>& data) {
  std::string body;
  for (const auto& ex : data) {
    ordered_json j = genome_to_json(ex.genome);
    j["labels"] = ex.labels;
    body += j.dump();
    body += '\n';
  }
  write_file(path, body, false);
}

std::vector<LabeledRoad> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  std::vector<LabeledRoad> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const ordered_json j = parse_json(line, path);
    LabeledRoad ex;
    ex.genome = genome_from_json(j, path);
    ex.labels = j.at("labels").get<std::vector<bool>>();
    if (ex.labels.size() != ex.genome.size())
      throw std::runtime_error("label/genome length mismatch at " + path.string() + ":" +
                               std::to_string(line_no));
    out.push_back(std::move(ex));
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const TransformerModel& model,
                     const CheckpointMeta& meta) {
  const auto refs = model.parameter_refs();
  ordered_json header;
  header["format_version"] = 1;
  header["config"] = config_to_json(model.config());
  header["meta"] = {{"pos_weight", meta.pos_weight},
                    {"seed", meta.seed},
                    {"best_epoch", meta.best_epoch},
                    {"val_loss", meta.val_loss},
                    {"val_sensitivity", meta.val_sensitivity},
                    {"val_specificity", meta.val_specificity}};
  ordered_json tensors = ordered_json::array();
  for (const auto& ref : refs) {
    ordered_json t;
    t["name"] = ref.name;
    t["rows"] = static_cast<std::int64_t>(ref.rows);
    t["cols"] = static_cast<std::int64_t>(ref.cols);
    tensors.push_back(std::move(t));
  }
  header["tensors"] = std::move(tensors);

  const std::string header_text = header.dump();
  std::string blob;
  blob.reserve(sizeof(kCheckpointMagic) + 8 + header_text.size());
  blob.append(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::uint64_t hlen = header_text.size();
  blob.append(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  blob.append(header_text);
  for (const auto& ref : refs) {
    blob.append(reinterpret_cast<const char*>(ref.data),
                static_cast<std::size_t>(ref.size()) * sizeof(double));
  }
  write_file(path, blob, true);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string blob = read_file(path, true);
  if (blob.size() < sizeof(kCheckpointMagic) + 8 ||
      std::memcmp(blob.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path.string());
  std::uint64_t hlen = 0;
  std::memcpy(&hlen, blob.data() + sizeof(kCheckpointMagic), sizeof(hlen));
  const std::size_t header_at = sizeof(kCheckpointMagic) + 8;
  if (blob.size() < header_at + hlen)
    throw std::runtime_error("truncated checkpoint header: " + path.string());
  const ordered_json header =
      parse_json(blob.substr(header_at, static_cast<std::size_t>(hlen)), path);
  if (header.at("format_version").get<int>() != 1)
    throw std::runtime_error("unsupported checkpoint version in " + path.string());

  LoadedCheckpoint loaded{TransformerModel(config_from_json(header.at("config"))), {}};
  const auto& meta = header.at("meta");
  loaded.meta.pos_weight = meta.at("pos_weight").get<double>();
  loaded.meta.seed = meta.at("seed").get<std::uint64_t>();
  loaded.meta.best_epoch = meta.at("best_epoch").get<int>();
  loaded.meta.val_loss = meta.at("val_loss").get<double>();
  loaded.meta.val_sensitivity = meta.at("val_sensitivity").get<double>();
  loaded.meta.val_specificity = meta.at("val_specificity").get<double>();

  auto refs = loaded.model.parameter_refs();
  const auto& tensors = header.at("tensors");
  if (tensors.size() != refs.size())
    throw std::runtime_error("tensor manifest mismatch in " + path.string());
  std::size_t offset = header_at + static_cast<std::size_t>(hlen);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& t = tensors[i];
    if (t.at("name").get<std::string>() != refs[i].name ||
        t.at("rows").get<std::int64_t>() != refs[i].rows ||
        t.at("cols").get<std::int64_t>() != refs[i].cols)
      throw std::runtime_error("tensor shape mismatch for '" + refs[i].name + "' in " +
                               path.string());
    const std::size_t bytes = static_cast<std::size_t>(refs[i].size()) * sizeof(double);
    if (blob.size() < offset + bytes)
      throw std::runtime_error("truncated tensor data in " + path.string());
    std::memcpy(refs[i].data, blob.data() + offset, bytes);
    offset += bytes;
  }
  if (offset != blob.size())
    throw std::runtime_error("trailing bytes after tensor data in " + path.string());
  if (!loaded.model.parameters_finite())
    throw std::runtime_error("checkpoint holds non-finite parameters: " + path.string());
  return loaded;
}

void save_population(const std::filesystem::path& path, const Population& pop) {
  ordered_json j;
  j["epoch"] = pop.epoch;
  j["next_id"] = pop.next_id;
  ordered_json members = ordered_json::array();
  for (const auto& m : pop.members) {
    ordered_json e;
    e["id"] = m.id;
    e["f1"] = m.f1;
    e["f2"] = m.f2;
    e["curvatures"] = m.genome.curvature;
    e["arc_lengths"] = m.genome.arc_length;
    members.push_back(std::move(e));
  }
  j["members"] = std::move(members);
  write_file(path, j.dump(2) + "\n", false);
}

Population load_population(const std::filesystem::path& path) {
  const ordered_json j = parse_json(read_file(path, false), path);
  Population pop;
  pop.epoch = j.at("epoch").get<int>();
  pop.next_id = j.at("next_id").get<std::uint64_t>();
  for (const auto& e : j.at("members")) {
    ScoredGenome m;
    m.id = e.at("id").get<std::uint64_t>();
    m.f1 = e.at("f1").get<double>();
    m.f2 = e.at("f2").get<double>();
    m.genome = genome_from_json(e, path);
    pop.members.push_back(std::move(m));
  }
  return pop;
}

void save_ga_metrics_csv(const std::filesystem::path& path,
                         const std::vector<GaEpochMetrics>& metrics) {
  std::string csv = "epoch,mean_oob_probability,median_pairwise_distance,pool_size,"
                    "n_invalid_offspring_dropped\n";
  char line[160];
  for (const auto& m : metrics) {
    std::snprintf(line, sizeof(line), "%d,%.6f,%.6f,%zu,%zu\n", m.epoch,
                  m.mean_oob_probability, m.median_pairwise_distance, m.pool_size,
                  m.invalid_offspring_dropped);
    csv += line;
  }
  write_file(path, csv, false);
}

void save_budget_csv(const std::filesystem::path& path, const BudgetSummary& summary) {
  std::string csv = "Statistic,Min.,Avg.,Max.\n";
  char line[128];
  const auto row = [&](const char* name, const BudgetTableRow& r) {
    std::snprintf(line, sizeof(line), "%s,%ld,%.2f,%ld\n", name, r.min_v, r.avg, r.max_v);
    csv += line;
  };
  row("# Executed", summary.executed);
  row("# Invalid", summary.invalid);
  row("# Faults", summary.faults);
  write_file(path, csv, false);
}

std::string render_novelty_report(const NoveltyStats& stats) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "mean minimum pairwise distance: %.2f\n"
                "mean median pairwise distance: %.2f\n"
                "tests with nearest neighbour farther than %.2f: %zu\n",
                stats.mean_min, stats.mean_median, stats.threshold, stats.count_above);
  return std::string(buf);
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  write_file(path, content, false);
}

std::string read_text(const std::filesystem::path& path) { return read_file(path, false); }

}  // namespace roadgen

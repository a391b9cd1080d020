#include "vnd/curation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "json_util.hpp"

namespace vnd {

using detail::json;

std::string set_name_str(SetName n) {
  switch (n) {
    case SetName::SS: return "SS";
    case SetName::VR: return "VR";
    case SetName::MC: return "MC";
    case SetName::Pseudo: return "PSEUDO";
    case SetName::Gold: return "GOLD";
  }
  throw std::logic_error("unreachable set name");
}

SetName set_name_from_str(const std::string& s) {
  if (s == "SS") return SetName::SS;
  if (s == "VR") return SetName::VR;
  if (s == "MC") return SetName::MC;
  if (s == "PSEUDO") return SetName::Pseudo;
  if (s == "GOLD") return SetName::Gold;
  throw std::runtime_error("unknown curated-set name: " + s);
}

std::vector<std::string> CuratedSet::positive_ids() const {
  std::vector<std::string> ids;
  for (const auto& [id, label] : pairs)
    if (label == 1) ids.push_back(id);
  return ids;
}

std::size_t CuratedSet::count_label(int label) const {
  std::size_t n = 0;
  for (const auto& [id, l] : pairs)
    if (l == label) ++n;
  return n;
}

const int* CuratedSet::find_label(const std::string& clip_id) const {
  for (const auto& [id, l] : pairs)
    if (id == clip_id) return &l;
  return nullptr;
}

void save_curated_set(const CuratedSet& set, const std::string& path) {
  std::ostringstream out;
  json header;
  header["name"] = set_name_str(set.name);
  json params = json::object();
  for (const auto& [k, v] : set.params) params[k] = detail::json_double(v);
  header["params"] = params;
  out << header.dump() << "\n";
  for (const auto& [id, label] : set.pairs) out << id << "\t" << label << "\n";
  detail::write_file(path, out.str());
}

CuratedSet load_curated_set(const std::string& path) {
  std::istringstream in(detail::read_file(path));
  CuratedSet set;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  bool first_content = true;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (first_content) {
      first_content = false;
      if (!line.empty() && line[0] == '{') {
        json header;
        try {
          header = json::parse(line);
        } catch (const json::exception& e) {
          throw std::runtime_error("curated set: parse error at line " +
                                   std::to_string(line_no) + ": " + e.what());
        }
        set.name = set_name_from_str(header.at("name").get<std::string>());
        if (header.contains("params"))
          for (const auto& [k, v] : header.at("params").items())
            set.params[k] = detail::double_from_json(v);
        have_header = true;
        continue;
      }
      // headerless pair file (oracle labels): treat as a gold set
      set.name = SetName::Gold;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("curated set: expected clip_id<TAB>label at line " +
                               std::to_string(line_no));
    const std::string id = line.substr(0, tab);
    const std::string lab = line.substr(tab + 1);
    if (lab != "0" && lab != "1")
      throw std::runtime_error("curated set: label must be 0 or 1 at line " +
                               std::to_string(line_no));
    if (!seen.insert(id).second)
      throw std::runtime_error("curated set: duplicate clip_id " + id + " at line " +
                               std::to_string(line_no));
    set.pairs.emplace_back(id, lab == "1" ? 1 : 0);
  }
  (void)have_header;
  return set;
}

double sentence_similarity(const Vec& e1, const Vec& e2) {
  if (e1.size() != e2.size())
    throw std::invalid_argument("sentence_similarity: dimension mismatch (" +
                                std::to_string(e1.size()) + " vs " + std::to_string(e2.size()) +
                                ")");
  const double n1 = norm(e1);
  const double n2 = norm(e2);
  if (n1 == 0.0 || n2 == 0.0) return 0.0;
  const double cos = dot(e1, e2) / (n1 * n2);
  return cos > 0.0 ? cos : 0.0;
}

CuratedSet derive_ss(const Corpus& corpus, double c) {
  if (c < 0.0 || c > 1.0) throw std::invalid_argument("derive_ss: c must be in [0, 1]");
  CuratedSet set;
  set.name = SetName::SS;
  set.params["c"] = c;
  for (const ClipRecord& r : corpus.clips) {
    if (!r.keystep_emb) continue;  // y = phi: excluded entirely
    const double s = sentence_similarity(r.sent_emb, *r.keystep_emb);
    set.pairs.emplace_back(r.clip_id, s >= c ? 1 : 0);
  }
  return set;
}

CuratedSet derive_vr(const Corpus& corpus) {
  CuratedSet set;
  set.name = SetName::VR;
  for (const ClipRecord& r : corpus.clips)
    if (r.keystep_text) set.pairs.emplace_back(r.clip_id, 1);
  return set;
}

std::size_t TaskClassifier::task_row(const std::string& task_label) const {
  for (std::size_t i = 0; i < tasks.size(); ++i)
    if (tasks[i] == task_label) return i;
  throw std::runtime_error("task label not in classifier taxonomy: " + task_label);
}

namespace {

Vec softmax(Vec logits) {
  double m = logits[0];
  for (double x : logits) m = std::max(m, x);
  double z = 0.0;
  for (double& x : logits) {
    x = std::exp(x - m);
    z += x;
  }
  for (double& x : logits) x /= z;
  return logits;
}

const Vec& modality_features(const ClipRecord& r, TaskClassifier::Modality modality) {
  return modality == TaskClassifier::Modality::Video ? r.video_feat : r.sent_emb;
}

}  // namespace

Vec TaskClassifier::predict_proba(const Vec& features) const {
  Vec logits = matvec(weight, features);
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += bias[i];
  return softmax(std::move(logits));
}

TaskClassifier train_task_classifier(const Corpus& corpus, TaskClassifier::Modality modality,
                                     const TaskTrainConfig& cfg) {
  std::vector<const ClipRecord*> labeled;
  std::vector<std::string> tasks;
  for (const ClipRecord& r : corpus.clips) {
    if (!r.task_label) continue;
    labeled.push_back(&r);
    if (std::find(tasks.begin(), tasks.end(), *r.task_label) == tasks.end())
      tasks.push_back(*r.task_label);
  }
  if (tasks.size() < 2)
    throw std::runtime_error("train_task_classifier: need at least 2 distinct task labels, got " +
                             std::to_string(tasks.size()));

  TaskClassifier clf;
  clf.modality = modality;
  clf.tasks = tasks;
  const std::size_t dim = modality_features(*labeled.front(), modality).size();
  clf.weight = Mat(tasks.size(), dim, 0.0);
  clf.bias = Vec(tasks.size(), 0.0);

  std::vector<std::size_t> targets;
  targets.reserve(labeled.size());
  for (const ClipRecord* r : labeled) targets.push_back(clf.task_row(*r->task_label));

  const double inv_n = 1.0 / static_cast<double>(labeled.size());
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    Mat gw(tasks.size(), dim, 0.0);
    Vec gb(tasks.size(), 0.0);
    for (std::size_t i = 0; i < labeled.size(); ++i) {
      const Vec& x = modality_features(*labeled[i], modality);
      Vec p = clf.predict_proba(x);
      p[targets[i]] -= 1.0;
      for (std::size_t t = 0; t < tasks.size(); ++t) {
        const double g = p[t];
        if (g == 0.0) continue;
        double* row = gw.data.data() + t * dim;
        for (std::size_t d = 0; d < dim; ++d) row[d] += g * x[d];
        gb[t] += g;
      }
    }
    for (std::size_t k = 0; k < clf.weight.data.size(); ++k)
      clf.weight.data[k] -= cfg.lr * inv_n * gw.data[k];
    for (std::size_t t = 0; t < tasks.size(); ++t) clf.bias[t] -= cfg.lr * inv_n * gb[t];
  }
  return clf;
}

CuratedSet derive_mc(const Corpus& corpus, const TaskClassifier& fv, const TaskClassifier& ft,
                     std::size_t k) {
  if (fv.tasks != ft.tasks)
    throw std::runtime_error("derive_mc: classifiers trained on different task taxonomies");
  std::vector<const ClipRecord*> labeled;
  for (const ClipRecord& r : corpus.clips) {
    if (!r.task_label)
      throw std::runtime_error("derive_mc: clip " + r.clip_id + " is missing task_label");
    labeled.push_back(&r);
  }
  if (k > labeled.size())
    throw std::invalid_argument("derive_mc: k exceeds the number of task-labeled clips");

  // rank 1 = highest own-task probability; ties broken by ascending clip_id
  auto ranks = [&](const TaskClassifier& clf, TaskClassifier::Modality modality) {
    std::vector<std::pair<double, const ClipRecord*>> scored;
    scored.reserve(labeled.size());
    for (const ClipRecord* r : labeled) {
      const Vec p = clf.predict_proba(modality_features(*r, modality));
      scored.emplace_back(p[clf.task_row(*r->task_label)], r);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second->clip_id < b.second->clip_id;
    });
    std::unordered_map<std::string, std::size_t> rank;
    for (std::size_t i = 0; i < scored.size(); ++i) rank[scored[i].second->clip_id] = i + 1;
    return rank;
  };
  const auto video_rank = ranks(fv, TaskClassifier::Modality::Video);
  const auto text_rank = ranks(ft, TaskClassifier::Modality::Text);

  CuratedSet set;
  set.name = SetName::MC;
  set.params["k"] = static_cast<double>(k);
  for (const ClipRecord* r : labeled) {
    const bool pos = video_rank.at(r->clip_id) <= k && text_rank.at(r->clip_id) <= k;
    set.pairs.emplace_back(r->clip_id, pos ? 1 : 0);
  }
  return set;
}

void save_task_classifier(const TaskClassifier& clf, const std::string& path) {
  json j;
  j["modality"] = clf.modality == TaskClassifier::Modality::Video ? "video" : "text";
  j["n_tasks"] = clf.tasks.size();
  j["dim"] = clf.weight.cols;
  j["tasks"] = clf.tasks;
  j["weight"] = clf.weight.data;
  j["bias"] = clf.bias;
  detail::write_file(path, j.dump() + "\n");
}

TaskClassifier load_task_classifier(const std::string& path) {
  json j = json::parse(detail::read_file(path));
  TaskClassifier clf;
  clf.modality = j.at("modality").get<std::string>() == "video" ? TaskClassifier::Modality::Video
                                                                : TaskClassifier::Modality::Text;
  clf.tasks = j.at("tasks").get<std::vector<std::string>>();
  const std::size_t n = j.at("n_tasks").get<std::size_t>();
  const std::size_t dim = j.at("dim").get<std::size_t>();
  if (n != clf.tasks.size())
    throw std::runtime_error("task classifier: header n_tasks disagrees with task list");
  clf.weight.rows = n;
  clf.weight.cols = dim;
  clf.weight.data = detail::vec_from_json(j.at("weight"));
  if (clf.weight.data.size() != n * dim)
    throw std::runtime_error("task classifier: weight size disagrees with dims header");
  clf.bias = detail::vec_from_json(j.at("bias"));
  if (clf.bias.size() != n)
    throw std::runtime_error("task classifier: bias size disagrees with dims header");
  return clf;
}

}  // namespace vnd

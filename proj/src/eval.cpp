#include "vnd/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

#include "json_util.hpp"

namespace vnd {

using detail::json;

EvalReport evaluate(const Checkpoint& ckpt, const CuratedSet& gold, const Corpus& corpus) {
  if (gold.pairs.empty()) throw std::runtime_error("evaluate: empty gold set");
  EvalReport report;
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(gold.pairs.size());
  for (const auto& [id, label] : gold.pairs) {
    if (label != 0 && label != 1)
      throw std::runtime_error("evaluate: gold label for clip " + id + " must be 0 or 1");
    const ClipRecord& clip = corpus.at(id);
    const double s = score_clip(ckpt, clip);
    scores.push_back(s);
    labels.push_back(label);
    report.table.emplace_back(id, s, label);
    if (label == 1) ++report.n_pos;
    else ++report.n_neg;
  }
  report.roc_auc = roc_auc(scores, labels);
  report.chosen_threshold = select_threshold(scores, labels);
  return report;
}

EvalReport grid_search(const Corpus& corpus, const CuratedSet& val_gold,
                       const std::vector<double>& c_grid,
                       const std::vector<std::size_t>& n_grid, const TrainConfig& base_cfg,
                       std::size_t jobs) {
  if (c_grid.empty() || n_grid.empty())
    throw std::invalid_argument("grid_search: empty grid axis");
  const Corpus train_split = split_subset(corpus, Split::Train);
  if (train_split.clips.empty())
    throw std::runtime_error("grid_search: corpus has no train split");
  for (const auto& [id, label] : val_gold.pairs) {
    const ClipRecord& clip = corpus.at(id);
    if (!clip.split || *clip.split != Split::Val)
      throw std::runtime_error("grid_search: gold clip " + id +
                               " is not in the validation split");
    (void)label;
  }
  if (val_gold.pairs.empty()) throw std::runtime_error("grid_search: empty validation gold set");

  std::vector<double> cs = c_grid;
  std::sort(cs.begin(), cs.end());
  std::vector<std::size_t> ns = n_grid;
  std::sort(ns.begin(), ns.end());

  struct Cell {
    double c;
    std::size_t n;
  };
  std::vector<Cell> cells;
  for (double c : cs)
    for (std::size_t n : ns) cells.push_back({c, n});

  std::vector<GridRow> rows(cells.size());
  std::vector<std::string> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto run_cells = [&]() {
    while (true) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= cells.size()) return;
      try {
        TrainConfig cfg = base_cfg;
        cfg.c = cells[idx].c;
        cfg.n_negatives = cells[idx].n;
        const CuratedSet positives = derive_ss(train_split, cfg.c);
        const TrainResult trained = train(positives, train_split, cfg);
        const EvalReport rep = evaluate(trained.checkpoint, val_gold, corpus);
        rows[idx] = {cells[idx].c, cells[idx].n, rep.roc_auc};
      } catch (const std::exception& e) {
        errors[idx] = e.what();
      }
    }
  };
  if (jobs <= 1) {
    run_cells();
  } else {
    std::vector<std::thread> pool;
    const std::size_t n_threads = std::min(jobs, cells.size());
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(run_cells);
    for (std::thread& t : pool) t.join();
  }
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (!errors[i].empty())
      throw std::runtime_error("grid_search: cell (c=" + std::to_string(cells[i].c) +
                               ", n=" + std::to_string(cells[i].n) + ") failed: " + errors[i]);

  EvalReport report;
  report.grid = rows;  // already in (c asc, |N| asc) order
  for (const GridRow& row : rows) {
    if (!report.best || row.val_roc_auc > report.best->val_roc_auc ||
        (row.val_roc_auc == report.best->val_roc_auc &&
         (row.n_negatives < report.best->n_negatives ||
          (row.n_negatives == report.best->n_negatives && row.c < report.best->c))))
      report.best = row;
  }
  report.roc_auc = report.best->val_roc_auc;
  return report;
}

std::string format_report(const EvalReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  if (!report.grid.empty()) {
    out << "c      |N|  val ROC-AUC\n";
    for (const GridRow& row : report.grid)
      out << std::setw(4) << row.c << "  " << std::setw(3) << row.n_negatives << "  "
          << std::setw(10) << row.val_roc_auc << "\n";
    if (report.best)
      out << "best: c=" << report.best->c << " |N|=" << report.best->n_negatives
          << " val ROC-AUC=" << report.best->val_roc_auc << "\n";
    return out.str();
  }
  out << "ROC-AUC: " << report.roc_auc << "\n";
  out << "threshold (Youden J): " << report.chosen_threshold << "\n";
  out << "positives: " << report.n_pos << "  negatives: " << report.n_neg << "\n";
  return out.str();
}

void save_report(const EvalReport& report, const std::string& path) {
  std::ostringstream out;
  if (!report.grid.empty()) {
    json header;
    header["type"] = "grid";
    if (report.best) {
      header["best"] = {{"c", report.best->c},
                        {"n_negatives", report.best->n_negatives},
                        {"val_roc_auc", report.best->val_roc_auc}};
    }
    out << header.dump() << "\n";
    for (const GridRow& row : report.grid)
      out << json(row.c).dump() << "\t" << row.n_negatives << "\t"
          << json(row.val_roc_auc).dump() << "\n";
  } else {
    json header;
    header["type"] = "eval";
    header["n_pos"] = report.n_pos;
    header["n_neg"] = report.n_neg;
    header["roc_auc"] = report.roc_auc;
    header["chosen_threshold"] = detail::json_double(report.chosen_threshold);
    out << header.dump() << "\n";
    for (const auto& [id, score, label] : report.table)
      out << id << "\t" << json(score).dump() << "\t" << label << "\n";
  }
  detail::write_file(path, out.str());
}

EvalReport load_report(const std::string& path) {
  std::istringstream in(detail::read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty report file: " + path);
  json header = json::parse(line);
  EvalReport report;
  const std::string type = header.at("type").get<std::string>();
  if (type == "grid") {
    if (header.contains("best")) {
      GridRow best;
      best.c = header.at("best").at("c").get<double>();
      best.n_negatives = header.at("best").at("n_negatives").get<std::size_t>();
      best.val_roc_auc = header.at("best").at("val_roc_auc").get<double>();
      report.best = best;
      report.roc_auc = best.val_roc_auc;
    }
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream row(line);
      std::string c_str, n_str, auc_str;
      if (!std::getline(row, c_str, '\t') || !std::getline(row, n_str, '\t') ||
          !std::getline(row, auc_str))
        throw std::runtime_error("malformed grid row: " + line);
      report.grid.push_back({json::parse(c_str).get<double>(),
                             static_cast<std::size_t>(std::stoull(n_str)),
                             json::parse(auc_str).get<double>()});
    }
  } else if (type == "eval") {
    report.n_pos = header.at("n_pos").get<std::size_t>();
    report.n_neg = header.at("n_neg").get<std::size_t>();
    report.roc_auc = header.at("roc_auc").get<double>();
    report.chosen_threshold = detail::double_from_json(header.at("chosen_threshold"));
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream row(line);
      std::string id, score_str, label_str;
      if (!std::getline(row, id, '\t') || !std::getline(row, score_str, '\t') ||
          !std::getline(row, label_str))
        throw std::runtime_error("malformed report row: " + line);
      report.table.emplace_back(id, json::parse(score_str).get<double>(),
                                std::stoi(label_str));
    }
  } else {
    throw std::runtime_error("unknown report type: " + type);
  }
  return report;
}

}  // namespace vnd

#include "sep/walkspace.hpp"

#include <algorithm>
#include <sstream>

namespace sep {

// ---------------------------------------------------------------------------
// PathPrefix
// ---------------------------------------------------------------------------

int PathPrefix::value_at(int t) const {
  int v = 0;
  for (int i = 0; i < t; ++i) v += steps[i];
  return v;
}

int PathPrefix::running_max() const {
  int v = 0, m = 0;
  for (int i = 0; i < theta; ++i) {
    v += steps[i];
    m = std::max(m, v);
  }
  return m;
}

int PathPrefix::running_min() const {
  int v = 0, m = 0;
  for (int i = 0; i < theta; ++i) {
    v += steps[i];
    m = std::min(m, v);
  }
  return m;
}

void PathPrefix::validate() const {
  if (theta < 0 || theta > length())
    throw config_error("prefix stop index out of range");
  for (int8_t s : steps)
    if (s != 1 && s != -1) throw config_error("prefix steps must be +-1");
}

PathPrefix PathPrefix::from_string(const std::string& ud, int theta) {
  PathPrefix p;
  p.steps.reserve(ud.size());
  for (char c : ud) {
    if (c == 'U' || c == 'u')
      p.steps.push_back(1);
    else if (c == 'D' || c == 'd')
      p.steps.push_back(-1);
    else
      throw config_error("path string must consist of U/D characters");
  }
  p.theta = theta < 0 ? p.length() : theta;
  p.validate();
  return p;
}

std::string PathPrefix::to_string() const {
  std::string s;
  s.reserve(theta);
  for (int i = 0; i < theta; ++i) s.push_back(steps[i] > 0 ? 'U' : 'D');
  return s;
}

PathPrefix concat(const PathPrefix& a, const PathPrefix& b) {
  PathPrefix r;
  r.steps.reserve(a.theta + b.theta);
  r.steps.insert(r.steps.end(), a.steps.begin(), a.steps.begin() + a.theta);
  r.steps.insert(r.steps.end(), b.steps.begin(), b.steps.begin() + b.theta);
  r.theta = a.theta + b.theta;
  return r;
}

// ---------------------------------------------------------------------------
// PathTree
// ---------------------------------------------------------------------------

PathTree PathTree::build(int horizon, TreeMode mode, Statistic statistic,
                         int full_cap) {
  if (horizon < 1) throw config_error("tree horizon must be >= 1");
  PathTree tree;
  tree.mode_ = mode;
  tree.statistic_ = statistic;
  tree.horizon_ = horizon;
  tree.level_start_.assign(horizon + 2, 0);

  if (mode == TreeMode::Full) {
    if (horizon > full_cap)
      throw resource_error("full-mode horizon " + std::to_string(horizon) +
                           " exceeds cap " + std::to_string(full_cap));
    std::size_t total = (std::size_t(1) << (horizon + 1)) - 1;
    tree.nodes_.resize(total);
    int id = 0;
    for (int t = 0; t <= horizon; ++t) {
      tree.level_start_[t] = id;
      std::uint64_t count = std::uint64_t(1) << t;
      for (std::uint64_t bits = 0; bits < count; ++bits, ++id) {
        TreeNode& n = tree.nodes_[id];
        n.t = t;
        n.path = bits;
        if (t == 0) {
          n.value = 0;
          n.max_value = 0;
        } else {
          int parent = tree.level_start_[t - 1] +
                       static_cast<int>(bits & ((std::uint64_t(1) << (t - 1)) - 1));
          const TreeNode& p = tree.nodes_[parent];
          int step = (bits >> (t - 1)) & 1 ? 1 : -1;
          n.value = p.value + step;
          n.max_value = std::max(p.max_value, n.value);
          n.parent = parent;
          tree.nodes_[parent].child[step > 0 ? 1 : 0] = id;
        }
      }
    }
    tree.level_start_[horizon + 1] = id;
    return tree;
  }

  // Augmented: recombining states keyed by (t, value [, running max]).
  bool with_max = statistic == Statistic::TimeValueMax;
  tree.state_index_.resize(horizon + 1);
  tree.nodes_.push_back(TreeNode{});
  tree.state_index_[0][{0, 0}] = 0;
  tree.level_start_[0] = 0;
  for (int t = 0; t < horizon; ++t) {
    int begin = tree.level_start_[t];
    int end = static_cast<int>(tree.nodes_.size());
    tree.level_start_[t + 1] = end;
    for (int v = begin; v < end; ++v) {
      for (int step : {-1, +1}) {
        int cv = tree.nodes_[v].value + step;
        int cm = with_max ? std::max(tree.nodes_[v].max_value, cv) : 0;
        auto key = std::make_pair(cv, cm);
        auto& index = tree.state_index_[t + 1];
        auto it = index.find(key);
        int child_id;
        if (it == index.end()) {
          child_id = static_cast<int>(tree.nodes_.size());
          TreeNode c;
          c.t = t + 1;
          c.value = cv;
          c.max_value = cm;
          tree.nodes_.push_back(c);
          index.emplace(key, child_id);
        } else {
          child_id = it->second;
        }
        tree.nodes_[v].child[step > 0 ? 1 : 0] = child_id;
      }
    }
  }
  tree.level_start_[horizon + 1] = static_cast<int>(tree.nodes_.size());
  return tree;
}

int PathTree::full_node_at(int t, std::uint64_t path_bits) const {
  return level_start_[t] + static_cast<int>(path_bits);
}

int PathTree::full_node(const PathPrefix& p) const {
  if (mode_ != TreeMode::Full) throw config_error("full_node on augmented tree");
  if (p.theta > horizon_) throw config_error("prefix deeper than horizon");
  std::uint64_t bits = 0;
  for (int i = 0; i < p.theta; ++i)
    if (p.steps[i] > 0) bits |= std::uint64_t(1) << i;
  return full_node_at(p.theta, bits);
}

int PathTree::ancestor(int v, int t) const {
  if (mode_ != TreeMode::Full) throw config_error("ancestor on augmented tree");
  const TreeNode& n = nodes_[v];
  if (t > n.t) throw config_error("ancestor depth exceeds node depth");
  return full_node_at(t, n.path & ((std::uint64_t(1) << t) - 1));
}

int PathTree::state_node(int t, int value, int maxv) const {
  if (mode_ != TreeMode::Augmented)
    throw config_error("state_node on full tree");
  int m = statistic_ == Statistic::TimeValueMax ? maxv : 0;
  auto it = state_index_[t].find({value, m});
  if (it == state_index_[t].end()) return -1;
  return it->second;
}

int PathTree::node_of_prefix(const PathPrefix& p) const {
  if (p.theta > horizon_) throw config_error("prefix deeper than horizon");
  if (mode_ == TreeMode::Full) return full_node(p);
  int id = state_node(p.theta, p.endpoint(),
                      statistic_ == Statistic::TimeValueMax ? p.running_max() : 0);
  if (id < 0) throw config_error("prefix maps to no augmented state");
  return id;
}

PathPrefix PathTree::prefix_of(int v) const {
  if (mode_ != TreeMode::Full) throw config_error("prefix_of on augmented tree");
  const TreeNode& n = nodes_[v];
  PathPrefix p;
  p.steps.resize(n.t);
  for (int i = 0; i < n.t; ++i)
    p.steps[i] = (n.path >> i) & 1 ? 1 : -1;
  p.theta = n.t;
  return p;
}

std::string PathTree::node_key(int v) const {
  const TreeNode& n = nodes_[v];
  std::ostringstream os;
  os << 't' << n.t;
  if (mode_ == TreeMode::Full) {
    os << ':';
    for (int i = 0; i < n.t; ++i) os << (((n.path >> i) & 1) ? 'U' : 'D');
  } else {
    os << ":v" << n.value;
    if (statistic_ == Statistic::TimeValueMax) os << ":m" << n.max_value;
  }
  return os.str();
}

int PathTree::node_from_key(const std::string& key) const {
  if (key.size() < 2 || key[0] != 't') throw io_error("bad node key: " + key);
  std::size_t colon = key.find(':');
  if (colon == std::string::npos) throw io_error("bad node key: " + key);
  int t = 0;
  try {
    t = std::stoi(key.substr(1, colon - 1));
  } catch (const std::exception&) {
    throw io_error("bad node key: " + key);
  }
  if (t < 0 || t > horizon_) throw io_error("node key depth out of range: " + key);
  std::string rest = key.substr(colon + 1);
  if (mode_ == TreeMode::Full) {
    if (static_cast<int>(rest.size()) != t)
      throw io_error("node key path length mismatch: " + key);
    std::uint64_t bits = 0;
    for (int i = 0; i < t; ++i) {
      if (rest[i] == 'U')
        bits |= std::uint64_t(1) << i;
      else if (rest[i] != 'D')
        throw io_error("bad node key path: " + key);
    }
    return full_node_at(t, bits);
  }
  if (rest.empty() || rest[0] != 'v') throw io_error("bad node key: " + key);
  int value = 0, maxv = 0;
  std::size_t m = rest.find(":m");
  try {
    if (m == std::string::npos) {
      value = std::stoi(rest.substr(1));
    } else {
      value = std::stoi(rest.substr(1, m - 1));
      maxv = std::stoi(rest.substr(m + 2));
    }
  } catch (const std::exception&) {
    throw io_error("bad node key: " + key);
  }
  int id = state_node(t, value, maxv);
  if (id < 0) throw io_error("node key names no state: " + key);
  return id;
}

// ---------------------------------------------------------------------------
// TargetMeasure
// ---------------------------------------------------------------------------

TargetMeasure TargetMeasure::from_atoms(
    std::vector<std::pair<int, Rational>> atoms) {
  std::sort(atoms.begin(), atoms.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<int, Rational>> merged;
  for (auto& [x, w] : atoms) {
    w.canonicalize();  // tolerate inputs built as raw num/den pairs
    if (w < 0) throw config_error("measure weight must be nonnegative");
    if (w == 0) continue;
    if (!merged.empty() && merged.back().first == x)
      merged.back().second += w;
    else
      merged.emplace_back(x, w);
  }
  if (merged.empty()) throw config_error("measure has no mass");
  Rational total(0), mean(0);
  for (const auto& [x, w] : merged) {
    total += w;
    mean += Rational(x) * w;
  }
  const Rational tol(1, 1000000000000L);  // 1e-12
  if (abs(total - 1) > tol)
    throw config_error("measure weights must sum to 1 (got " +
                       format_rational(total) + ")");
  if (abs(mean) > tol)
    throw config_error("measure must be centered (mean " +
                       format_rational(mean) + ")");
  TargetMeasure m;
  m.atoms = std::move(merged);
  return m;
}

Rational TargetMeasure::weight(int x) const {
  for (const auto& [p, w] : atoms)
    if (p == x) return w;
  return Rational(0);
}

Rational TargetMeasure::second_moment() const {
  Rational acc(0);
  for (const auto& [x, w] : atoms) acc += Rational(x) * Rational(x) * w;
  return acc;
}

}  // namespace sep

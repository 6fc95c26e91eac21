#include "mdaug/mdt.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "mdaug/errors.hpp"
#include "mdaug/rng.hpp"

namespace mdaug::mdt {

namespace {

bool rsrp_in_range(double v) {
  return std::isfinite(v) && v >= kRsrpMinDbm && v <= kRsrpMaxDbm;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, std::size_t row, std::size_t col) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw DataError("parse error at row " + std::to_string(row) + ", column " +
                    std::to_string(col) + ": '" + s + "'");
  }
  if (pos != s.size()) {
    throw DataError("parse error at row " + std::to_string(row) + ", column " +
                    std::to_string(col) + ": '" + s + "'");
  }
  return v;
}

}  // namespace

void SparseRsrp::set(Pci pci, double dbm) {
  auto it = std::lower_bound(
      entries_.begin(), entries_.end(), pci,
      [](const auto& e, Pci key) { return e.first < key; });
  if (it != entries_.end() && it->first == pci) {
    it->second = dbm;
  } else {
    entries_.insert(it, {pci, dbm});
  }
}

std::optional<double> SparseRsrp::get(Pci pci) const noexcept {
  auto it = std::lower_bound(
      entries_.begin(), entries_.end(), pci,
      [](const auto& e, Pci key) { return e.first < key; });
  if (it != entries_.end() && it->first == pci) return it->second;
  return std::nullopt;
}

FingerprintDatabase::FingerprintDatabase(std::vector<FingerprintRecord> records,
                                         std::vector<Pci> universe,
                                         geo::Projection projection)
    : records_(std::move(records)),
      universe_(std::move(universe)),
      projection_(projection) {
  if (records_.empty()) throw DataError("database: no records");
  if (universe_.empty()) throw DataError("database: empty PCI universe");
  if (!std::is_sorted(universe_.begin(), universe_.end()) ||
      std::adjacent_find(universe_.begin(), universe_.end()) !=
          universe_.end()) {
    throw DataError("database: PCI universe must be sorted and unique");
  }
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& rec = records_[i];
    if (rec.rsrp.empty()) {
      throw DataError("database: record " + std::to_string(i) +
                      " has no RSRP values");
    }
    for (const auto& [pci, dbm] : rec.rsrp.entries()) {
      if (!std::binary_search(universe_.begin(), universe_.end(), pci)) {
        throw DataError("database: record " + std::to_string(i) +
                        " references PCI " + std::to_string(pci) +
                        " outside the universe");
      }
      if (!rsrp_in_range(dbm)) {
        throw DataError("database: record " + std::to_string(i) + " PCI " +
                        std::to_string(pci) + " RSRP out of range");
      }
    }
  }
}

FingerprintDatabase load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");

  std::string header;
  if (!std::getline(in, header)) {
    throw DataError("schema error: '" + path.string() + "' is empty");
  }
  if (!header.empty() && header.back() == '\r') header.pop_back();

  const auto cols = split_fields(header);
  if (cols.size() < 3 || cols[0] != "Longitude" || cols[1] != "Latitude") {
    throw DataError("schema error: header must start with Longitude,Latitude "
                    "followed by RSRP_PCI_<id> columns");
  }
  std::vector<Pci> universe;
  universe.reserve(cols.size() - 2);
  static const std::string kPrefix = "RSRP_PCI_";
  for (std::size_t c = 2; c < cols.size(); ++c) {
    const std::string& name = cols[c];
    if (name.rfind(kPrefix, 0) != 0 || name.size() == kPrefix.size()) {
      throw DataError("schema error: bad column name '" + name + "'");
    }
    const std::string id_part = name.substr(kPrefix.size());
    if (!std::all_of(id_part.begin(), id_part.end(),
                     [](unsigned char ch) { return std::isdigit(ch); })) {
      throw DataError("schema error: bad column name '" + name + "'");
    }
    const unsigned long id = std::stoul(id_part);
    const Pci pci = static_cast<Pci>(id);
    if (!universe.empty() && pci <= universe.back()) {
      throw DataError("schema error: PCI columns must be strictly ascending");
    }
    universe.push_back(pci);
  }

  std::vector<FingerprintRecord> records;
  std::vector<geo::GeoPoint> locations;
  std::string line;
  std::size_t row = 1;  // header is row 0
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != cols.size()) {
      throw DataError("parse error at row " + std::to_string(row) +
                      ": expected " + std::to_string(cols.size()) +
                      " fields, got " + std::to_string(fields.size()));
    }
    FingerprintRecord rec;
    rec.location.lon = parse_double(fields[0], row, 0);
    rec.location.lat = parse_double(fields[1], row, 1);
    geo::validate(rec.location);
    for (std::size_t c = 2; c < fields.size(); ++c) {
      if (fields[c].empty()) continue;  // undetected PCI
      const double v = parse_double(fields[c], row, c);
      if (!rsrp_in_range(v)) {
        throw DataError("range error at row " + std::to_string(row) +
                        ", column " + std::to_string(c) + ": RSRP " +
                        fields[c] + " outside [-160, -30] dBm");
      }
      rec.rsrp.set(universe[c - 2], v);
    }
    if (rec.rsrp.empty()) {
      throw DataError("parse error at row " + std::to_string(row) +
                      ": record has no RSRP values");
    }
    locations.push_back(rec.location);
    records.push_back(std::move(rec));
    ++row;
  }
  if (records.empty()) throw DataError("empty dataset: '" + path.string() + "'");

  auto projection = geo::make_projection(locations);
  for (auto& rec : records) rec.local = projection.project(rec.location);
  return FingerprintDatabase(std::move(records), std::move(universe),
                             projection);
}

void write_csv(const FingerprintDatabase& db,
               const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");

  out << "Longitude,Latitude";
  for (Pci pci : db.universe()) out << ",RSRP_PCI_" << pci;
  out << '\n';

  char buf[64];
  for (const auto& rec : db.records()) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f", rec.location.lon,
                  rec.location.lat);
    out << buf;
    for (Pci pci : db.universe()) {
      out << ',';
      if (auto v = rec.rsrp.get(pci)) {
        std::snprintf(buf, sizeof(buf), "%.2f", *v);
        out << buf;
      }
    }
    out << '\n';
  }
  if (!out) throw DataError("I/O error writing '" + path.string() + "'");
}

SplitResult split(const FingerprintDatabase& db, const SplitSpec& spec) {
  const auto check_frac = [](double f, const char* name) {
    if (!(f > 0.0 && f < 1.0)) {
      throw UsageError(std::string("split: ") + name + " must be in (0, 1)");
    }
  };
  check_frac(spec.train_frac, "train_frac");
  check_frac(spec.val_frac, "val_frac");
  check_frac(spec.test_frac, "test_frac");
  if (std::abs(spec.train_frac + spec.val_frac + spec.test_frac - 1.0) >
      1e-12) {
    throw UsageError("split: fractions must sum to 1");
  }
  const std::size_t m = db.size();
  if (m < 10) throw DataError("dataset too small to split");

  const auto n_val = static_cast<std::size_t>(
      std::floor(spec.val_frac * static_cast<double>(m)));
  const auto n_test = static_cast<std::size_t>(
      std::floor(spec.test_frac * static_cast<double>(m)));
  const std::size_t n_train = m - n_val - n_test;

  std::vector<std::size_t> idx(m);
  for (std::size_t i = 0; i < m; ++i) idx[i] = i;
  stats::Rng rng(spec.seed, 0);
  for (std::size_t i = m - 1; i > 0; --i) {
    const std::size_t j = rng.next_below(i + 1);
    std::swap(idx[i], idx[j]);
  }

  const auto take = [&](std::size_t begin, std::size_t count) {
    std::vector<std::size_t> part(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                                  idx.begin() + static_cast<std::ptrdiff_t>(begin + count));
    std::sort(part.begin(), part.end());  // keep original row order
    std::vector<FingerprintRecord> recs;
    recs.reserve(part.size());
    for (std::size_t i : part) recs.push_back(db.records()[i]);
    return FingerprintDatabase(std::move(recs), db.universe(),
                               db.projection());
  };

  return SplitResult{take(0, n_train), take(n_train, n_val),
                     take(n_train + n_val, n_test)};
}

FingerprintDatabase reproject(const FingerprintDatabase& db,
                              const geo::Projection& target) {
  std::vector<FingerprintRecord> recs = db.records();
  for (auto& rec : recs) rec.local = target.project(rec.location);
  return FingerprintDatabase(std::move(recs), db.universe(), target);
}

}  // namespace mdaug::mdt

#include "lesionpatch/ingestion.hpp"

#include <fstream>
#include <set>

#include "lesionpatch/csv.hpp"

namespace lesionpatch {

DatasetIndex load_index(const std::filesystem::path& root) {
  const auto index_path = root / kIndexFileName;
  std::ifstream in(index_path);
  if (!in) throw MissingIndexFile(index_path.string());

  DatasetIndex index;
  index.root = root;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line != kIndexHeader) {
        throw MalformedRow(1, std::string("expected header '") + kIndexHeader + "'");
      }
      continue;
    }
    if (line.empty() || line == "\r") continue;
    const auto fields = csv::split(line);
    if (fields.size() != 4) {
      throw MalformedRow(line_no, "expected 4 fields, got " +
                                      std::to_string(fields.size()));
    }
    if (fields[0].empty()) throw MalformedRow(line_no, "empty image_id");
    if (fields[1].empty()) throw MalformedRow(line_no, "empty image_path");
    if (!ids.insert(fields[0]).second) {
      throw MalformedRow(line_no, "duplicate image_id " + fields[0]);
    }
    const auto label = parse_label(fields[3]);
    if (!label) throw UnknownLabel(line_no, fields[3]);

    IndexRecord record;
    record.image_id = fields[0];
    record.image_path = fields[1];
    if (!fields[2].empty()) record.mask_path = std::filesystem::path(fields[2]);
    record.label = *label;
    if (!std::filesystem::exists(index.resolve(record.image_path))) {
      throw MissingFile(index.resolve(record.image_path).string());
    }
    if (record.mask_path && !std::filesystem::exists(index.resolve(*record.mask_path))) {
      throw MissingFile(index.resolve(*record.mask_path).string());
    }
    index.records.push_back(std::move(record));
  }
  if (line_no == 0) throw MalformedRow(1, "empty index file");
  return index;
}

void write_index(const DatasetIndex& index) {
  std::filesystem::create_directories(index.root);
  const auto path = index.root / kIndexFileName;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << kIndexHeader << '\n';
  for (const auto& r : index.records) {
    const std::string mask = r.mask_path ? r.mask_path->generic_string() : "";
    for (const std::string& field : {r.image_id, r.image_path.generic_string(), mask}) {
      if (!csv::is_plain_field(field)) {
        throw ValidationError("index field '" + field + "' contains a separator");
      }
    }
    out << r.image_id << ',' << r.image_path.generic_string() << ',' << mask
        << ',' << to_string(r.label) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace lesionpatch

#include "lesionpatch/ingestion.hpp"
#include "lesionpatch/parallel.hpp"

// After Eigen: resolv.h, pulled in by httplib, defines _res as a macro.
#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <regex>
#include <set>

namespace lesionpatch {
namespace {

struct Endpoint {
  std::string base;    // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};

Endpoint parse_endpoint(const std::string& url) {
  static const std::regex pattern(R"(^(http://[^/]+)(/.*)?$)");
  std::smatch match;
  if (!std::regex_match(url, match, pattern)) {
    throw NetworkError("unsupported endpoint '" + url + "' (expected http://host[:port][/prefix])");
  }
  std::string prefix = match[2].str();
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {match[1].str(), prefix};
}

bool is_safe_id(const std::string& id) {
  return !id.empty() && id != "." && id != ".." &&
         std::all_of(id.begin(), id.end(), [](unsigned char c) {
           return std::isalnum(c) || c == '_' || c == '-' || c == '.';
         });
}

enum class Outcome { kFetched, kPresent, kNotFound };

class ResourceFetcher {
 public:
  ResourceFetcher(const Endpoint& endpoint, std::atomic<std::size_t>& requests)
      : client_(endpoint.base), prefix_(endpoint.prefix), requests_(requests) {
    client_.set_connection_timeout(5);
    client_.set_read_timeout(30);
  }

  // Mirrors {prefix}/{kind}/{id} into `target` unless a file of the
  // advertised size is already there.
  Outcome fetch(const std::string& kind, const std::string& id,
                const std::filesystem::path& target) {
    const std::string path = prefix_ + "/" + kind + "/" + id;
    auto head = client_.Head(path);
    if (!head) throw NetworkError("HEAD " + path + ": " + httplib::to_string(head.error()));
    if (head->status == 404) return Outcome::kNotFound;
    if (head->status != 200) {
      throw NetworkError("HEAD " + path + ": HTTP " + std::to_string(head->status));
    }
    if (head->has_header("Content-Length") && std::filesystem::exists(target)) {
      const auto advertised = std::stoull(head->get_header_value("Content-Length"));
      if (std::filesystem::file_size(target) == advertised) return Outcome::kPresent;
    }
    ++requests_;
    auto res = client_.Get(path);
    if (!res) throw NetworkError("GET " + path + ": " + httplib::to_string(res.error()));
    if (res->status == 404) return Outcome::kNotFound;
    if (res->status != 200) {
      throw NetworkError("GET " + path + ": HTTP " + std::to_string(res->status));
    }
    std::filesystem::create_directories(target.parent_path());
    const auto partial = std::filesystem::path(target.string() + ".part");
    {
      std::ofstream out(partial, std::ios::binary);
      out.write(res->body.data(), static_cast<std::streamsize>(res->body.size()));
      if (!out) throw IoError("cannot write " + partial.string());
    }
    std::filesystem::rename(partial, target);
    return Outcome::kFetched;
  }

 private:
  httplib::Client client_;
  std::string prefix_;
  std::atomic<std::size_t>& requests_;
};

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto end = text.find_last_not_of(" \t\r\n");
  return end == std::string::npos ? std::string() : text.substr(0, end + 1);
}

}  // namespace

FetchReport fetch_remote(const std::vector<std::string>& image_ids,
                         const FetchOptions& options,
                         const std::filesystem::path& dest) {
  {
    std::set<std::string> unique(image_ids.begin(), image_ids.end());
    if (unique.size() != image_ids.size()) {
      for (const auto& id : image_ids) {
        if (unique.erase(id) == 0) throw DuplicateImageId(id);
      }
    }
  }
  FetchReport report;
  report.statuses.resize(image_ids.size());
  std::vector<std::optional<IndexRecord>> records(image_ids.size());
  std::atomic<std::size_t> requests{0};

  if (!image_ids.empty()) {
    std::string url = options.endpoint;
    if (url.empty()) {
      if (const char* env = std::getenv(kEndpointEnv)) url = env;
    }
    if (url.empty()) throw NetworkError(std::string("no endpoint given and ") + kEndpointEnv + " unset");
    const Endpoint endpoint = parse_endpoint(url);

    parallel_for(image_ids.size(), std::max(1u, options.concurrency),
                 [&](std::size_t i, unsigned) {
      const std::string& id = image_ids[i];
      FetchStatus& status = report.statuses[i];
      status.image_id = id;
      if (!is_safe_id(id)) {
        status.kind = FetchStatus::Kind::kFailed;
        status.detail = "image id is not a safe file name";
        return;
      }
      try {
        ResourceFetcher fetcher(endpoint, requests);
        const auto image_rel = std::filesystem::path("images") / (id + ".png");
        const auto mask_rel = std::filesystem::path("masks") / (id + ".png");
        const auto label_rel = std::filesystem::path("labels") / (id + ".txt");

        const Outcome image = fetcher.fetch("images", id, dest / image_rel);
        if (image == Outcome::kNotFound) {
          status.kind = FetchStatus::Kind::kNotFound;
          status.detail = "image not found";
          return;
        }
        const Outcome label = fetcher.fetch("labels", id, dest / label_rel);
        if (label == Outcome::kNotFound) {
          status.kind = FetchStatus::Kind::kNotFound;
          status.detail = "label not found";
          return;
        }
        const Outcome mask = fetcher.fetch("masks", id, dest / mask_rel);

        const auto parsed = parse_label(read_text(dest / label_rel));
        if (!parsed) {
          status.kind = FetchStatus::Kind::kFailed;
          status.detail = "unrecognised label";
          return;
        }
        IndexRecord record;
        record.image_id = id;
        record.image_path = image_rel;
        if (mask != Outcome::kNotFound) record.mask_path = mask_rel;
        record.label = *parsed;
        records[i] = std::move(record);

        const bool fresh = image == Outcome::kFetched || label == Outcome::kFetched ||
                           mask == Outcome::kFetched;
        status.kind = fresh ? FetchStatus::Kind::kDownloaded
                            : FetchStatus::Kind::kAlreadyPresent;
      } catch (const Error& e) {
        status.kind = FetchStatus::Kind::kFailed;
        status.detail = e.what();
      } catch (const std::exception& e) {
        status.kind = FetchStatus::Kind::kFailed;
        status.detail = e.what();
      }
    });
  }

  DatasetIndex index;
  index.root = dest;
  for (auto& r : records) {
    if (r) index.records.push_back(std::move(*r));
  }
  std::sort(index.records.begin(), index.records.end(),
            [](const IndexRecord& a, const IndexRecord& b) { return a.image_id < b.image_id; });
  write_index(index);
  report.index = load_index(dest);
  report.requests = requests.load();
  return report;
}

}  // namespace lesionpatch

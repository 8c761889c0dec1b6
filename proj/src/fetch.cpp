#include <curl/curl.h>
#include <zlib.h>

#include <cstdio>
#include <cstdlib>
#include <memory>

#include "reluhead/data.hpp"
#include "reluhead/error.hpp"

namespace reluhead {

DatasetId parse_dataset(const std::string& name) {
  if (name == "mnist") return DatasetId::Mnist;
  if (name == "fashion") return DatasetId::Fashion;
  if (name == "wdbc") return DatasetId::Wdbc;
  throw ConfigError("unknown dataset '" + name + "' (expected mnist, fashion or wdbc)");
}

std::string to_string(DatasetId id) {
  switch (id) {
    case DatasetId::Mnist: return "mnist";
    case DatasetId::Fashion: return "fashion";
    case DatasetId::Wdbc: return "wdbc";
  }
  return "?";
}

namespace {

const char* const kTrainImages = "train-images-idx3-ubyte.gz";
const char* const kTrainLabels = "train-labels-idx1-ubyte.gz";
const char* const kTestImages = "t10k-images-idx3-ubyte.gz";
const char* const kTestLabels = "t10k-labels-idx1-ubyte.gz";

std::vector<std::string> class_names_for(DatasetId id) {
  if (id == DatasetId::Fashion)
    return {"T-shirt/top", "Trouser", "Pullover", "Dress", "Coat",
            "Sandal",      "Shirt",   "Sneaker",  "Bag",   "Ankle boot"};
  if (id == DatasetId::Wdbc) return {"benign", "malignant"};
  std::vector<std::string> digits;
  for (int d = 0; d < 10; ++d) digits.push_back(std::to_string(d));
  return digits;
}

std::size_t gunzipped_length(const std::filesystem::path& path, unsigned char magic_tail) {
  std::unique_ptr<std::remove_pointer_t<gzFile>, int (*)(gzFile)> f(gzopen(path.c_str(), "rb"),
                                                                      gzclose);
  if (!f) throw IntegrityError(path.string() + ": unreadable");
  unsigned char buf[1 << 16];
  std::size_t total = 0;
  bool first = true;
  for (;;) {
    const int got = gzread(f.get(), buf, sizeof buf);
    if (got < 0) throw IntegrityError(path.string() + ": corrupt gzip stream");
    if (got == 0) break;
    if (first) {
      if (got < 4 || buf[0] != 0 || buf[1] != 0 || buf[2] != 8 || buf[3] != magic_tail)
        throw IntegrityError(path.string() + ": bad IDX magic");
      first = false;
    }
    total += static_cast<std::size_t>(got);
  }
  return total;
}

std::size_t write_to_file(char* data, std::size_t size, std::size_t count, void* user) {
  return std::fwrite(data, size, count, static_cast<std::FILE*>(user));
}

void download(const std::string& url, const std::filesystem::path& dest) {
  static const bool initialised = curl_global_init(CURL_GLOBAL_DEFAULT) == CURLE_OK;
  if (!initialised) throw NetworkError("libcurl initialisation failed");
  const std::filesystem::path tmp = dest.string() + ".part";
  std::FILE* out = std::fopen(tmp.c_str(), "wb");
  if (!out) throw IoError("cannot write " + tmp.string());
  std::unique_ptr<CURL, void (*)(CURL*)> curl(curl_easy_init(), curl_easy_cleanup);
  if (!curl) {
    std::fclose(out);
    throw NetworkError("curl_easy_init failed");
  }
  curl_easy_setopt(curl.get(), CURLOPT_URL, url.c_str());
  curl_easy_setopt(curl.get(), CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(curl.get(), CURLOPT_FAILONERROR, 1L);
  curl_easy_setopt(curl.get(), CURLOPT_CONNECTTIMEOUT, 30L);
  curl_easy_setopt(curl.get(), CURLOPT_WRITEFUNCTION, write_to_file);
  curl_easy_setopt(curl.get(), CURLOPT_WRITEDATA, out);
  const CURLcode rc = curl_easy_perform(curl.get());
  std::fclose(out);
  if (rc != CURLE_OK) {
    std::filesystem::remove(tmp);
    throw NetworkError("download of " + url + " failed: " + curl_easy_strerror(rc));
  }
  std::filesystem::rename(tmp, dest);
}

std::string join_url(std::string base, const std::string& name) {
  if (!base.empty() && base.back() != '/') base.push_back('/');
  return base + name;
}

}  // namespace

std::vector<RemoteFile> dataset_files(DatasetId id) {
  if (id == DatasetId::Wdbc) return {{"wdbc.data", 0}};
  return {{kTrainImages, 16 + 60000ull * 784},
          {kTrainLabels, 8 + 60000},
          {kTestImages, 16 + 10000ull * 784},
          {kTestLabels, 8 + 10000}};
}

std::string default_mirror(DatasetId id) {
  switch (id) {
    case DatasetId::Mnist: return "https://ossci-datasets.s3.amazonaws.com/mnist/";
    case DatasetId::Fashion:
      return "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/";
    case DatasetId::Wdbc:
      return "https://archive.ics.uci.edu/ml/machine-learning-databases/breast-cancer-wisconsin/";
  }
  return {};
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("RELUHEAD_DATA_DIR"); env && *env) return env;
  const char* home = std::getenv("HOME");
  return std::filesystem::path(home ? home : ".") / ".cache" / "reluhead";
}

void verify_file(DatasetId id, const RemoteFile& file, const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IntegrityError(path.string() + ": missing");
  if (id == DatasetId::Wdbc) {
    Dataset ds;
    try {
      ds = load_wdbc(path);
    } catch (const Error& e) {
      throw IntegrityError(path.string() + ": " + e.what());
    }
    if (ds.size() != 569)
      throw IntegrityError(path.string() + ": expected 569 rows, found " +
                           std::to_string(ds.size()));
    return;
  }
  const unsigned char magic_tail = file.name.find("images") != std::string::npos ? 3 : 1;
  const std::size_t got = gunzipped_length(path, magic_tail);
  if (got != file.payload_bytes)
    throw IntegrityError(path.string() + ": payload is " + std::to_string(got) +
                         " bytes, expected " + std::to_string(file.payload_bytes));
}

FetchResult fetch(DatasetId id, const std::filesystem::path& dir,
                  const std::optional<std::string>& mirror) {
  const std::filesystem::path target = dir / to_string(id);
  std::filesystem::create_directories(target);
  const std::string base = mirror.value_or(default_mirror(id));
  FetchResult result;
  for (const RemoteFile& file : dataset_files(id)) {
    const std::filesystem::path path = target / file.name;
    if (std::filesystem::exists(path)) {
      try {
        verify_file(id, file, path);
        result.files.push_back(path);
        continue;
      } catch (const IntegrityError&) {
        std::filesystem::remove(path);
        result.repaired.push_back(file.name);
      }
    }
    download(join_url(base, file.name), path);
    ++result.downloaded;
    verify_file(id, file, path);  // a second failure propagates
    result.files.push_back(path);
  }
  return result;
}

LoadedSplits load_cached(DatasetId id, const std::filesystem::path& dir) {
  const std::filesystem::path target = dir / to_string(id);
  LoadedSplits out;
  for (const RemoteFile& file : dataset_files(id)) {
    const std::filesystem::path path = target / file.name;
    if (!std::filesystem::exists(path))
      throw IoError(path.string() + " is not cached; run `reluhead fetch " + to_string(id) + "`");
    out.files.push_back(path);
  }
  if (id == DatasetId::Wdbc) {
    out.train = load_wdbc(out.files[0]);
    out.test.class_names = out.train.class_names;
    return out;
  }
  out.train = load_idx(out.files[0], out.files[1], class_names_for(id));
  out.test = load_idx(out.files[2], out.files[3], class_names_for(id));
  out.train.split = Split::Train;
  out.test.split = Split::Test;
  return out;
}

}  // namespace reluhead

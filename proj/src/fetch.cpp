#include "memdialog/fetch.hpp"

#include <curl/curl.h>
#include <openssl/evp.h>
#include <spawn.h>
#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <memory>
#include <vector>

#include <spdlog/spdlog.h>

extern char** environ;

namespace memdialog {

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
      throw FetchError("sha256 init failed");
  }
  void update(const char* data, std::size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }
  std::string hex() {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), digest, &len);
    std::string out;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
      std::snprintf(buf, sizeof buf, "%02x", digest[i]);
      out += buf;
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

std::size_t write_file(char* ptr, std::size_t size, std::size_t n, void* user) {
  auto* out = static_cast<std::ofstream*>(user);
  out->write(ptr, static_cast<std::streamsize>(size * n));
  return *out ? size * n : 0;
}

bool ends_with(const std::string& s, std::string_view suffix) { return s.ends_with(suffix); }

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FetchError("cannot read " + path.string());
  Sha256 h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

void download(const std::string& url, const std::filesystem::path& out) {
  std::ofstream file(out, std::ios::binary | std::ios::trunc);
  if (!file) throw FetchError("cannot write " + out.string());
  std::unique_ptr<CURL, decltype(&curl_easy_cleanup)> curl(curl_easy_init(), curl_easy_cleanup);
  if (!curl) throw FetchError("curl init failed");
  char error[CURL_ERROR_SIZE] = {0};
  curl_easy_setopt(curl.get(), CURLOPT_URL, url.c_str());
  curl_easy_setopt(curl.get(), CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(curl.get(), CURLOPT_FAILONERROR, 1L);
  curl_easy_setopt(curl.get(), CURLOPT_CONNECTTIMEOUT, 30L);
  curl_easy_setopt(curl.get(), CURLOPT_WRITEFUNCTION, write_file);
  curl_easy_setopt(curl.get(), CURLOPT_WRITEDATA, &file);
  curl_easy_setopt(curl.get(), CURLOPT_ERRORBUFFER, error);
  const auto rc = curl_easy_perform(curl.get());
  if (rc != CURLE_OK) {
    file.close();
    std::filesystem::remove(out);
    throw FetchError("download of " + url + " failed: " +
                     (error[0] ? std::string(error) : std::string(curl_easy_strerror(rc))));
  }
}

std::filesystem::path fetch_dataset(const std::string& url, const std::filesystem::path& out_dir,
                                    const std::string& sha256) {
  std::filesystem::create_directories(out_dir);
  auto name = url.substr(url.find_last_of('/') + 1);
  if (const auto q = name.find('?'); q != std::string::npos) name.resize(q);
  if (name.empty()) name = "download";
  const auto target = out_dir / name;

  spdlog::info("downloading {} -> {}", url, target.string());
  download(url, target);
  const auto digest = sha256_file(target);
  spdlog::info("sha256 {}", digest);
  if (!sha256.empty() && digest != sha256)
    throw FetchError("sha256 mismatch for " + target.string() + ": expected " + sha256 + ", got " + digest);

  if (ends_with(name, ".tar.gz") || ends_with(name, ".tgz") || ends_with(name, ".tar")) {
    const std::string archive = target.string(), dir = out_dir.string();
    std::vector<std::string> args = {"tar", "-xf", archive, "-C", dir};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = 0;
    if (posix_spawnp(&pid, "tar", nullptr, nullptr, argv.data(), environ) != 0)
      throw FetchError("cannot run tar");
    int status = 0;
    waitpid(pid, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
      throw FetchError("tar failed to unpack " + archive);
    spdlog::info("unpacked into {}", dir);
  }
  return target;
}

}  // namespace memdialog

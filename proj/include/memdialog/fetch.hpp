#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

namespace memdialog {

class FetchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lowercase hex SHA-256 of a file.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view bytes);

/// HTTP(S) GET into `out`. Throws FetchError on transport or HTTP errors.
void download(const std::string& url, const std::filesystem::path& out);

/// Downloads `url` into `out_dir`, verifies the digest when `sha256` is
/// non-empty and unpacks .tar.gz / .tgz / .tar archives with the system tar.
/// Returns the downloaded file's path.
std::filesystem::path fetch_dataset(const std::string& url, const std::filesystem::path& out_dir,
                                    const std::string& sha256);

}  // namespace memdialog

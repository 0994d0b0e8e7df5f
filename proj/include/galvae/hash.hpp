#pragma once

#include <string>
#include <string_view>

#include "galvae/imaging.hpp"

namespace galvae {

std::string sha1_hex(std::string_view bytes);

/// Same digest `git hash-object` reports: sha1("blob <len>\0" + bytes).
std::string git_blob_hash(std::string_view bytes);

/// git_blob_hash of the image's 8-bit netpbm encoding, i.e. the hash of the
/// file write_pnm would produce.
std::string image_hash(const Image& img);

}  // namespace galvae

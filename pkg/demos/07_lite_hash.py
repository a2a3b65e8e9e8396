"""A 16-hex-digit fingerprint short enough to read aloud or post."""

import sys

from tba.core import digest, truncate_hex64

data = open(sys.argv[1], "rb").read() if len(sys.argv) > 1 else b"an impromptu recording"
print(truncate_hex64(digest(data)))

"""Synthetic labeled corpus with a planted signal.

The real shared-task data cannot be redistributed, so demos and the
end-to-end tests run on generated posts whose reliability is encoded in both
the token distribution and the metadata (engagement counts, images, shouted
titles, posting date). Generation is fully determined by the seed.
"""

from __future__ import annotations

import numpy as np

from .corpus import PostRecord
from .preprocess import DAY_ZERO_EPOCH

_NEUTRAL = (
    "the a of to in and for on with at from by about into over after again "
    "today people news post share group page online network status moment "
    "city country weather morning evening video photo friend family member "
    "question answer story event update comment message week month year"
).split()

_RELIABLE = (
    "ministry official statement confirmed report data health bulletin "
    "authority announcement verified source press conference hospital "
    "guideline measure policy public notice department institute study"
).split()

_UNRELIABLE = (
    "shocking secret miracle cure exposed hidden truth banned leaked "
    "conspiracy urgent forward immediately warning unbelievable instant "
    "remedy garlic hoax rumor viral panic cured overnight doctors hate"
).split()

_TITLE_WORDS = (
    "BREAKING URGENT WARNING ALERT SHOCKING TRUTH SECRET EXPOSED READ "
    "SHARE NOW IMPORTANT NOTICE EVERYONE MUST KNOW THIS"
).split()


def generate_corpus(n: int, seed: int, *, labeled: bool = True) -> list[PostRecord]:
    """Generate ``n`` posts; reliable posts (label 0) and unreliable posts
    (label 1) differ in vocabulary, engagement, imagery, titles, and date."""
    rng = np.random.default_rng(seed)
    records: list[PostRecord] = []
    for i in range(n):
        y = int(rng.random() < 0.5)
        signal_pool = _UNRELIABLE if y else _RELIABLE

        n_tokens = int(rng.integers(10, 36))
        tokens = []
        for _ in range(n_tokens):
            if rng.random() < 0.4:
                tokens.append(signal_pool[int(rng.integers(0, len(signal_pool)))])
            else:
                tokens.append(_NEUTRAL[int(rng.integers(0, len(_NEUTRAL)))])
        message = " ".join(tokens)

        title_p = 0.55 if y else 0.08
        if rng.random() < title_p:
            n_title = int(rng.integers(4, 8))
            title = " ".join(
                _TITLE_WORDS[int(rng.integers(0, len(_TITLE_WORDS)))] for _ in range(n_title)
            )
            message = f"{title} {message}"

        # occasional copied message so duplicate-post statistics are non-zero
        if i > 10 and rng.random() < 0.02:
            message = records[int(rng.integers(0, i))].post_message

        likes = float(np.round(rng.gamma(2.0, 25.0 if y else 90.0), 1))
        comments = float(np.round(rng.gamma(2.0, 8.0 if y else 30.0), 1))
        shares = float(np.round(rng.gamma(2.0, 30.0 if y else 10.0), 1))

        day = int(rng.normal(25.0 if y else 75.0, 18.0))
        timestamp = DAY_ZERO_EPOCH + day * 86_400 + int(rng.integers(0, 86_400))

        n_images = int(rng.integers(1, 4)) if rng.random() < (0.3 if y else 0.65) else 0
        images = tuple(f"img://{i}/{j}" for j in range(n_images))

        records.append(
            PostRecord(
                id=f"syn-{i:05d}",
                user_name=f"user{int(rng.integers(0, max(2, n // 4))):04d}",
                post_message=message,
                timestamp_post=None if rng.random() < 0.05 else timestamp,
                num_like_post=None if rng.random() < 0.07 else likes,
                num_comment_post=None if rng.random() < 0.07 else comments,
                num_share_post=None if rng.random() < 0.07 else shares,
                images=images,
                label=y if labeled else None,
            )
        )
    return records

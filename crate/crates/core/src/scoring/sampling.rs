use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// One slide's tiles, as seen by the sampler.
#[derive(Debug, Clone)]
pub struct TileGroup<'a, I> {
    pub slide_id: &'a str,
    pub items: &'a [I],
}

/// A drawn tile: index of the group and of the item inside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TileDraw {
    pub group: usize,
    pub item: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedSlide {
    pub slide_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TileSample {
    pub draws: Vec<TileDraw>,
    pub skipped: Vec<SkippedSlide>,
}

impl TileSample {
    pub fn resolve<'a, I>(&'a self, groups: &'a [TileGroup<'a, I>]) -> impl Iterator<Item = &'a I> + 'a {
        self.draws.iter().map(move |d| &groups[d.group].items[d.item])
    }
}

/// Draws exactly `quota` tiles from every slide: uniformly without
/// replacement when the slide has at least `quota` tiles, with replacement
/// otherwise. Slides without tiles are skipped and reported. Each slide uses
/// its own stream of `seed`, so the draw for one slide does not depend on
/// the others.
pub fn sample_tiles_per_slide<I>(groups: &[TileGroup<'_, I>], quota: usize, seed: u64) -> Result<TileSample> {
    if quota == 0 {
        return Err(Error::InvalidInput("sampling quota must be >= 1".into()));
    }
    let mut sample = TileSample::default();
    for (g, group) in groups.iter().enumerate() {
        let n = group.items.len();
        if n == 0 {
            log::warn!("slide {} has no tiles; skipped in sampling", group.slide_id);
            sample.skipped.push(SkippedSlide {
                slide_id: group.slide_id.to_string(),
                reason: "no tiles".into(),
            });
            continue;
        }
        let mut rng = stream_rng(seed, g as u64);
        if n >= quota {
            sample.draws.extend(
                index::sample(&mut rng, n, quota)
                    .into_iter()
                    .map(|item| TileDraw { group: g, item }),
            );
        } else {
            sample.draws.extend((0..quota).map(|_| TileDraw {
                group: g,
                item: rng.random_range(0..n),
            }));
        }
    }
    Ok(sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeMap, BTreeSet};

    #[test]
    fn quota_without_replacement() {
        let tiles: Vec<u32> = (0..1000).collect();
        let groups = [TileGroup { slide_id: "s", items: &tiles[..] }];
        let sample = sample_tiles_per_slide(&groups, 598, 1).unwrap();
        assert_eq!(sample.draws.len(), 598);
        let distinct: BTreeSet<_> = sample.draws.iter().map(|d| d.item).collect();
        assert_eq!(distinct.len(), 598);
    }

    #[test]
    fn small_slide_is_drawn_with_replacement() {
        let tiles = ["a", "b", "c"];
        let groups = [TileGroup { slide_id: "s", items: &tiles[..] }];
        let mut support = BTreeMap::new();
        for seed in 0..200 {
            let sample = sample_tiles_per_slide(&groups, 10, seed).unwrap();
            assert_eq!(sample.draws.len(), 10);
            for t in sample.resolve(&groups) {
                *support.entry(*t).or_insert(0usize) += 1;
            }
        }
        // every tile is drawn; each ~ 2000/3 times
        assert_eq!(support.len(), 3);
        assert!(support.values().all(|&c| c > 500 && c < 830));
    }

    #[test]
    fn forced_single_tile() {
        let tiles = [7u8];
        let groups = [TileGroup { slide_id: "s", items: &tiles[..] }];
        let sample = sample_tiles_per_slide(&groups, 1, 99).unwrap();
        assert_eq!(sample.resolve(&groups).copied().collect::<Vec<_>>(), vec![7]);
    }

    #[test]
    fn empty_slide_is_skipped_with_record() {
        let a = [1, 2, 3];
        let empty: [i32; 0] = [];
        let groups = [
            TileGroup { slide_id: "a", items: &a[..] },
            TileGroup { slide_id: "e", items: &empty[..] },
        ];
        let sample = sample_tiles_per_slide(&groups, 2, 0).unwrap();
        assert_eq!(sample.draws.len(), 2);
        assert_eq!(sample.skipped[0].slide_id, "e");
    }

    #[test]
    fn deterministic_and_zero_quota_rejected() {
        let a: Vec<u32> = (0..50).collect();
        let groups = [TileGroup { slide_id: "a", items: &a[..] }];
        assert_eq!(
            sample_tiles_per_slide(&groups, 20, 5).unwrap(),
            sample_tiles_per_slide(&groups, 20, 5).unwrap()
        );
        assert!(sample_tiles_per_slide(&groups, 0, 5).is_err());
    }
}

//! Floyd–Steinberg error diffusion on a serpentine scan.
//!
//! Near the borders the 7/16, 3/16, 5/16, 1/16 weights are renormalised over
//! the neighbours that exist, so quantisation error is never pushed off the
//! image. Only the residual of the final pixel is lost, which keeps the count
//! of set pixels within one of the continuous sum.

const THRESHOLD: f64 = 0.5;

/// Binarises a row-major `width x height` image with values in `[0, 1]`.
pub fn floyd_steinberg(values: &[f64], width: usize, height: usize) -> Vec<f64> {
    debug_assert_eq!(values.len(), width * height);
    let mut work = values.to_vec();
    let mut out = vec![0.0; values.len()];
    let w = width as isize;
    let h = height as isize;

    for y in 0..h {
        let (dir, xs): (isize, Box<dyn Iterator<Item = isize>>) = if y % 2 == 0 {
            (1, Box::new(0..w))
        } else {
            (-1, Box::new((0..w).rev()))
        };
        for x in xs {
            let idx = (y * w + x) as usize;
            let old = work[idx];
            let new = if old >= THRESHOLD { 1.0 } else { 0.0 };
            out[idx] = new;
            let err = old - new;

            let neighbours = [
                (x + dir, y, 7.0),
                (x - dir, y + 1, 3.0),
                (x, y + 1, 5.0),
                (x + dir, y + 1, 1.0),
            ];
            let inside = |&(nx, ny, _): &(isize, isize, f64)| nx >= 0 && nx < w && ny < h;
            let total: f64 = neighbours.iter().filter(|n| inside(n)).map(|n| n.2).sum();
            if total == 0.0 {
                continue;
            }
            for n in neighbours.iter().filter(|n| inside(n)) {
                work[(n.1 * w + n.0) as usize] += err * n.2 / total;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constants_stay_constant() {
        assert!(floyd_steinberg(&[0.0; 64], 8, 8).iter().all(|&x| x == 0.0));
        assert!(floyd_steinberg(&[1.0; 64], 8, 8).iter().all(|&x| x == 1.0));
    }

    #[test]
    fn half_gray_sets_half_the_pixels() {
        let out = floyd_steinberg(&vec![0.5; 64 * 64], 64, 64);
        let ones = out.iter().filter(|&&x| x == 1.0).count() as i64;
        assert!((ones - 2048).abs() <= 2, "{ones}");
    }

    #[test]
    fn single_row_and_column() {
        let row = floyd_steinberg(&[0.25; 8], 8, 1);
        assert_eq!(row.iter().sum::<f64>(), 2.0);
        let col = floyd_steinberg(&[0.75; 8], 1, 8);
        assert_eq!(col.iter().sum::<f64>(), 6.0);
    }

    proptest! {
        #[test]
        fn mean_is_preserved(
            (w, h, vals) in (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
                (Just(w), Just(h), prop::collection::vec(0.0f64..=1.0, w * h))
            })
        ) {
            let out = floyd_steinberg(&vals, w, h);
            prop_assert!(out.iter().all(|&x| x == 0.0 || x == 1.0));
            let diff = out.iter().sum::<f64>() - vals.iter().sum::<f64>();
            prop_assert!(diff.abs() <= 2.0, "diff {}", diff);
        }
    }
}

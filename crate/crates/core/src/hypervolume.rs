//! Exact hypervolume for one to three objectives.
//!
//! Two objectives use a sweep over the front sorted by the first objective;
//! three objectives slice along the third objective and sum the 2-D areas.
//! Points that do not strictly dominate the reference point contribute nothing.

use crate::scalar::Scalar;
use crate::vectors::{check_len, VectorError};

pub fn hypervolume<T: Scalar, P: AsRef<[T]>>(front: &[P], reference: &[T]) -> Result<T, VectorError> {
    let m = reference.len();
    if !(1..=3).contains(&m) {
        return Err(VectorError::UnsupportedDimension(m));
    }
    for p in front {
        check_len(m, p.as_ref().len())?;
    }
    let inside: Vec<&[T]> = front
        .iter()
        .map(|p| p.as_ref())
        .filter(|p| p.iter().zip(reference).all(|(x, r)| x < r))
        .collect();
    if inside.is_empty() {
        return Ok(T::zero());
    }
    Ok(match m {
        1 => reference[0] - inside.iter().map(|p| p[0]).fold(T::infinity(), T::min),
        2 => {
            let mut pts: Vec<[T; 2]> = inside.iter().map(|p| [p[0], p[1]]).collect();
            area_2d(&mut pts, reference[0], reference[1])
        }
        _ => volume_3d(&inside, reference),
    })
}

fn area_2d<T: Scalar>(pts: &mut [[T; 2]], ref_x: T, ref_y: T) -> T {
    pts.sort_by(|a, b| {
        a[0].partial_cmp(&b[0])
            .expect("finite")
            .then(a[1].partial_cmp(&b[1]).expect("finite"))
    });
    let mut area = T::zero();
    let mut best_y = ref_y;
    for p in pts.iter() {
        if p[1] < best_y {
            area += (ref_x - p[0]) * (best_y - p[1]);
            best_y = p[1];
        }
    }
    area
}

fn volume_3d<T: Scalar>(pts: &[&[T]], reference: &[T]) -> T {
    let mut order: Vec<&[T]> = pts.to_vec();
    order.sort_by(|a, b| a[2].partial_cmp(&b[2]).expect("finite"));
    let mut volume = T::zero();
    let mut slice: Vec<[T; 2]> = Vec::with_capacity(order.len());
    let mut i = 0;
    while i < order.len() {
        let z = order[i][2];
        while i < order.len() && order[i][2] == z {
            slice.push([order[i][0], order[i][1]]);
            i += 1;
        }
        let z_next = if i < order.len() { order[i][2] } else { reference[2] };
        let mut scratch = slice.clone();
        volume += area_2d(&mut scratch, reference[0], reference[1]) * (z_next - z);
    }
    volume
}

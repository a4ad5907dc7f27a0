//! CSV rendering. Numbers are written in the shortest decimal form that
//! parses back to the identical double, so repeated runs produce identical
//! bytes and consumers can round-trip the data losslessly.

use dropoutlab_core::GridScan;

/// Shortest round-trip decimal representation of a double.
pub fn format_f64(v: f64) -> String {
    format!("{v}")
}

/// Renders a two-dimensional grid: header row `w2\w1,<first-weight values>`,
/// then one row per second-weight value.
pub fn grid_csv(grid: &GridScan) -> String {
    let mut text = String::new();
    text.push_str("w2\\w1");
    for x in &grid.xs {
        text.push(',');
        text.push_str(&format_f64(*x));
    }
    text.push('\n');
    for (iy, y) in grid.ys.iter().enumerate() {
        text.push_str(&format_f64(*y));
        for v in &grid.values[iy] {
            text.push(',');
            text.push_str(&format_f64(*v));
        }
        text.push('\n');
    }
    text
}

/// Renders one-dimensional curves sharing an x grid: `headers` names the x
/// column followed by one name per curve.
pub fn curves_csv(headers: &[&str], xs: &[f64], columns: &[Vec<f64>]) -> String {
    assert_eq!(headers.len(), columns.len() + 1, "one header per column");
    for column in columns {
        assert_eq!(column.len(), xs.len(), "columns match the x grid");
    }
    let mut text = String::new();
    text.push_str(&headers.join(","));
    text.push('\n');
    for (i, x) in xs.iter().enumerate() {
        text.push_str(&format_f64(*x));
        for column in columns {
            text.push(',');
            text.push_str(&format_f64(column[i]));
        }
        text.push('\n');
    }
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting_is_shortest_and_round_trips() {
        let awkward = [
            0.1,
            1.0 / 3.0,
            2f64.ln(),
            -1.5e-300,
            6.02e23,
            0.0,
            -7.0,
            f64::MIN_POSITIVE,
        ];
        for v in awkward {
            let text = format_f64(v);
            let back: f64 = text.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v} rendered as {text}");
        }
        assert_eq!(format_f64(0.1), "0.1");
        assert_eq!(format_f64(-7.0), "-7");
        assert_eq!(format_f64(1.0 / 3.0), "0.3333333333333333");
    }

    #[test]
    fn grid_csv_round_trips_losslessly() {
        let grid = GridScan {
            xs: vec![-1.0, 0.1, 1.0 / 3.0],
            ys: vec![0.25, 2f64.ln()],
            values: vec![vec![1.5, -2.5e-12, 0.3], vec![4.0, 5.0, 1e300]],
        };
        let text = grid_csv(&grid);
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        let head_cells: Vec<&str> = header.split(',').collect();
        assert_eq!(head_cells[0], "w2\\w1");
        for (i, cell) in head_cells[1..].iter().enumerate() {
            assert_eq!(cell.parse::<f64>().unwrap().to_bits(), grid.xs[i].to_bits());
        }
        for (iy, line) in lines.enumerate() {
            let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            assert_eq!(cells[0].to_bits(), grid.ys[iy].to_bits());
            for (ix, v) in cells[1..].iter().enumerate() {
                assert_eq!(v.to_bits(), grid.values[iy][ix].to_bits());
            }
        }
    }

    #[test]
    fn curves_csv_round_trips_losslessly() {
        let xs = vec![0.0, 0.5, 1.0];
        let columns = vec![vec![0.1, 0.2, 0.3], vec![-1.0, -2.0, -4.0]];
        let text = curves_csv(&["w1", "penalty", "approximation"], &xs, &columns);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "w1,penalty,approximation");
        for (i, line) in lines.enumerate() {
            let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            assert_eq!(cells[0].to_bits(), xs[i].to_bits());
            assert_eq!(cells[1].to_bits(), columns[0][i].to_bits());
            assert_eq!(cells[2].to_bits(), columns[1][i].to_bits());
        }
    }
}

//! Greedy graph coloring of tets: tets sharing a vertex get different colors.

/// Groups tet indices by color, each group ascending.
pub fn color_tets(tets: &[[u32; 4]], vertex_count: usize) -> Vec<Vec<u32>> {
    // 256 colors is far more than any tet mesh with bounded valence needs.
    let mut used = vec![[0u64; 4]; vertex_count];
    let mut groups: Vec<Vec<u32>> = Vec::new();
    for (t, tet) in tets.iter().enumerate() {
        let mut mask = [0u64; 4];
        for &v in tet {
            for l in 0..4 {
                mask[l] |= used[v as usize][l];
            }
        }
        let color = (0..256)
            .find(|&c| mask[c / 64] & (1 << (c % 64)) == 0)
            .expect("tet valence exceeds 255 colors");
        for &v in tet {
            used[v as usize][color / 64] |= 1 << (color % 64);
        }
        if groups.len() <= color {
            groups.resize_with(color + 1, Vec::new);
        }
        groups[color].push(t as u32);
    }
    groups
}

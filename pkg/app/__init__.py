# ideal-lab: computable ideals on ω

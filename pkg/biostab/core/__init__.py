"""数値ソルバー（放射場、基本状態、摂動放射輸送、線形安定性）"""

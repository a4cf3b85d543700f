"""biostab - 拡散光で照らされた前方散乱性の藻類懸濁液における走光性生物対流の発生解析"""

__version__ = '0.1.0'
